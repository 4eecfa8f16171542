#pragma once

// Dimension of the dynamical Lie algebra spanned by recursive commutators of a
// set of Hermitian generators, compared against dim su(N) = N^2 - 1.

#include "cavityctl/hilbert.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace cavityctl {

struct GeneratorSet {
  SpaceSpec space;
  std::vector<Matrix> generators;  ///< Hermitian
  std::vector<std::string> labels;

  void validate() const {
    for (std::size_t k = 0; k < generators.size(); ++k) {
      const auto& g = generators[k];
      if (g.rows() != space.dim() || g.cols() != space.dim())
        throw std::invalid_argument("GeneratorSet: generator " + std::to_string(k) + " has the wrong size");
      if (!is_hermitian(g, 1e-10)) throw std::invalid_argument("GeneratorSet: generator " + std::to_string(k) + " is not Hermitian");
    }
  }
};

/// Which elements are commuted at each order.
enum class NestingRule {
  NewestAgainstAll,   ///< new layer = [newest layer, every basis element so far]
  NestedWithGenerators,  ///< new layer = [newest layer, order-0 generators]
  FullClosure  ///< L_{k+1} = L_k + [L_k, L_k]; independent of the chosen representatives
};

inline std::string to_string(NestingRule r) {
  switch (r) {
    case NestingRule::NewestAgainstAll: return "newest_against_all";
    case NestingRule::NestedWithGenerators: return "nested_with_generators";
    case NestingRule::FullClosure: return "full_closure";
  }
  return "?";
}

inline NestingRule nesting_rule_from_string(const std::string& s) {
  if (s == "newest_against_all") return NestingRule::NewestAgainstAll;
  if (s == "nested_with_generators") return NestingRule::NestedWithGenerators;
  if (s == "full_closure") return NestingRule::FullClosure;
  throw std::invalid_argument("unknown nesting rule '" + s + "'");
}

struct AlgebraGrowth {
  std::vector<int> dims;  ///< dimension per commutator order, starting at order 0
  bool converged = false;  ///< reached N^2 - 1
  int target_dim = 0;

  int final_dim() const { return dims.empty() ? 0 : dims.back(); }
};

/// Orthonormal basis of a real subspace of anti-Hermitian traceless matrices.
class AlgebraBasis {
 public:
  AlgebraBasis(Eigen::Index n, double rank_tol) : n_(n), tol_(rank_tol), coords_(2 * n * n, 0) {}

  /// Adds the traceless part of `m` if it is independent; returns the new
  /// orthonormal element or an empty matrix.
  Matrix add(const Matrix& m) {
    Matrix t = m;
    t.diagonal().array() -= m.trace() / static_cast<double>(n_);
    Eigen::VectorXd v = vec(t);
    const double nv = v.norm();
    if (nv == 0.0) return {};
    v /= nv;
    for (int pass = 0; pass < 2; ++pass)
      if (coords_.cols() > 0) v -= coords_ * (coords_.transpose() * v);
    const double r = v.norm();
    if (r < tol_) return {};
    v /= r;
    coords_.conservativeResize(Eigen::NoChange, coords_.cols() + 1);
    coords_.col(coords_.cols() - 1) = v;
    return unvec(v);
  }

  int dim() const { return static_cast<int>(coords_.cols()); }
  const Eigen::MatrixXd& coords() const { return coords_; }
  Matrix element(int k) const { return unvec(coords_.col(k)); }

 private:
  Eigen::VectorXd vec(const Matrix& m) const {
    Eigen::VectorXd v(2 * n_ * n_);
    v.head(n_ * n_) = m.real().reshaped();
    v.tail(n_ * n_) = m.imag().reshaped();
    return v;
  }
  Matrix unvec(const Eigen::VectorXd& v) const {
    Matrix m(n_, n_);
    m.real() = v.head(n_ * n_).reshaped(n_, n_);
    m.imag() = v.tail(n_ * n_).reshaped(n_, n_);
    return m;
  }

  Eigen::Index n_;
  double tol_;
  Eigen::MatrixXd coords_;
};

/// Commutator growth of i * generators up to `max_order`.
///
/// Candidates are unit-normalized before projection, so `rank_tol` is a
/// relative threshold. Iteration stops once the algebra reaches N^2 - 1 or a
/// layer adds nothing; remaining orders repeat the last dimension.
inline AlgebraGrowth lie_algebra_growth(const GeneratorSet& gens, int max_order, double rank_tol = 1e-9,
                                        NestingRule rule = NestingRule::NewestAgainstAll) {
  if (max_order < 0) throw std::invalid_argument("lie_algebra_growth: max_order must be >= 0");
  gens.validate();
  const Eigen::Index n = gens.space.dim();
  AlgebraGrowth out;
  out.target_dim = static_cast<int>(n * n - 1);
  AlgebraBasis basis(n, rank_tol);

  std::vector<Matrix> order0;
  for (const auto& g : gens.generators) {
    Matrix e = basis.add(I * g);
    if (e.size()) order0.push_back(std::move(e));
  }
  std::vector<Matrix> all = order0, layer = order0;
  out.dims.push_back(basis.dim());

  for (int order = 1; order <= max_order; ++order) {
    if (basis.dim() >= out.target_dim || layer.empty()) {
      out.dims.push_back(basis.dim());
      continue;
    }
    if (rule == NestingRule::FullClosure) {
      const int d = basis.dim();
      std::vector<Matrix> el;
      el.reserve(d);
      for (int k = 0; k < d; ++k) el.push_back(basis.element(k));
      std::vector<Matrix> next;
      for (int i = 0; i < d && basis.dim() < out.target_dim; ++i)
        for (int j = i + 1; j < d && basis.dim() < out.target_dim; ++j) {
          Matrix e = basis.add(commutator(el[i], el[j]));
          if (e.size()) next.push_back(std::move(e));
        }
      layer = std::move(next);
      out.dims.push_back(basis.dim());
      continue;
    }
    const std::vector<Matrix>& partners = rule == NestingRule::NewestAgainstAll ? all : order0;
    const std::size_t n_partners = partners.size();
    std::vector<Matrix> next;
    for (const auto& x : layer) {
      for (std::size_t j = 0; j < n_partners && basis.dim() < out.target_dim; ++j) {
        Matrix e = basis.add(commutator(x, partners[j]));
        if (e.size()) next.push_back(std::move(e));
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    layer = std::move(next);
    out.dims.push_back(basis.dim());
  }
  out.converged = out.final_dim() == out.target_dim;
  return out;
}

struct ControllabilityVerdict {
  bool controllable = false;
  int achieved_dim = 0;
  int target_dim = 0;
  AlgebraGrowth growth;
};

inline ControllabilityVerdict is_controllable(const GeneratorSet& gens, double rank_tol = 1e-9, int max_order = 10,
                                              NestingRule rule = NestingRule::NewestAgainstAll) {
  ControllabilityVerdict v;
  v.growth = lie_algebra_growth(gens, max_order, rank_tol, rule);
  v.achieved_dim = v.growth.final_dim();
  v.target_dim = v.growth.target_dim;
  v.controllable = v.growth.converged;
  return v;
}

/// Generator set (H0, V_x[, V_y[, V_s]]) for the given space.
inline GeneratorSet control_generators(const SpaceSpec& spec, const SystemParams& params, bool with_y, bool with_squeeze) {
  GeneratorSet g;
  g.space = spec;
  auto [vx, vy] = build_rotation_generators(spec);
  g.generators.push_back(build_h0(spec, params).matrix);
  g.labels.push_back("H0");
  g.generators.push_back(vx.matrix);
  g.labels.push_back("Vx");
  if (with_y) {
    g.generators.push_back(vy.matrix);
    g.labels.push_back("Vy");
  }
  if (with_squeeze) {
    g.generators.push_back(build_squeeze_generator(spec).matrix);
    g.labels.push_back("Vs");
  }
  return g;
}

}  // namespace cavityctl
