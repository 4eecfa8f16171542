#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace cavityctl;
using namespace testing_helpers;

TEST(SpaceSpec, Dimensions) {
  SpaceSpec product{3, 4, SpinBasis::FullProduct};
  EXPECT_EQ(product.fock_dim(), 5);
  EXPECT_EQ(product.spin_dim(), 8);
  EXPECT_EQ(product.dim(), 40);
  SpaceSpec dicke{2, 5, SpinBasis::DickeSymmetricReduced};
  EXPECT_EQ(dicke.dim(), 18);
  EXPECT_EQ(dicke.index(2, 1), 7);
}

TEST(SpaceSpec, RejectsInvalid) {
  EXPECT_THROW((SpaceSpec{-1, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((SpaceSpec{1, -2}.validate()), std::invalid_argument);
  SpaceSpec s{2, 3};
  SystemParams p{1.0, 0.0, {0.0}};
  EXPECT_THROW(p.validate(s), std::invalid_argument);
  SystemParams neg{1.0, -0.1, {0.0, 0.0}};
  EXPECT_THROW(neg.validate(s), std::invalid_argument);
}

TEST(Operators, LadderCommutator) {
  SpaceSpec s{1, 6};
  auto [a, ad] = build_mode_ops(s);
  Matrix c = commutator(a.matrix, ad.matrix);
  // [a, a^dagger] = 1 except on the truncated top level.
  for (Eigen::Index k = 0; k < s.dim() - s.spin_dim(); ++k) EXPECT_NEAR(c(k, k).real(), 1.0, 1e-14);
}

TEST(Operators, PauliAlgebra) {
  SpaceSpec s{3, 1};
  for (int n = 1; n <= 3; ++n) {
    auto o = build_spin_ops(s, n);
    Matrix c = commutator(o.plus.matrix, o.minus.matrix);
    EXPECT_LT((c - o.z.matrix).norm(), 1e-14);
  }
  auto o1 = build_spin_ops(s, 1), o2 = build_spin_ops(s, 2);
  EXPECT_LT(commutator(o1.plus.matrix, o2.minus.matrix).norm(), 1e-14);
  EXPECT_THROW(build_spin_ops(s, 0), std::out_of_range);
  EXPECT_THROW(build_spin_ops(s, 4), std::out_of_range);
  EXPECT_THROW(build_spin_ops(SpaceSpec{2, 1, SpinBasis::DickeSymmetricReduced}, 1), std::invalid_argument);
}

TEST(Operators, CollectiveSu2) {
  for (auto basis : {SpinBasis::FullProduct, SpinBasis::DickeSymmetricReduced}) {
    SpaceSpec s{4, 1, basis};
    auto j = build_collective(s);
    // [Jx/2, Jy/2] = i Jz/2 for Pauli sums.
    Matrix c = commutator(j.jx.matrix, j.jy.matrix);
    EXPECT_LT((c - 2.0 * I * j.jz.matrix).norm(), 1e-12);
  }
}

TEST(Operators, H0ConservesExcitations) {
  SpaceSpec s{2, 4};
  SystemParams p{1.0, 0.0, {-1.0, 1.0}};
  Matrix h = build_h0(s, p).matrix;
  EXPECT_TRUE(is_hermitian(h));
  EXPECT_LT(commutator(h, build_excitation_number(s).matrix).norm(), 1e-12);
}

TEST(Operators, DickeAndProductSpectraAgree) {
  // Resonant spins started symmetric never leave the symmetric multiplet.
  SpaceSpec prod{2, 3}, dicke{2, 3, SpinBasis::DickeSymmetricReduced};
  SystemParams p{1.0, 0.0, {0.3, 0.3}};
  HermitianSpectrum hp(build_h0(prod, p).matrix), hd(build_h0(dicke, p).matrix);
  Vector gp = product_ket(prod, 1, dicke_states(prod).G), gd = product_ket(dicke, 1, dicke_states(dicke).G);
  for (double t : {0.3, 1.7}) {
    const Vector ep = hp.apply(t, gp), ed = hd.apply(t, gd);
    for (int photons = 0; photons < 4; ++photons) {
      EXPECT_NEAR(std::abs(ep(prod.index(photons, 0))), std::abs(ed(dicke.index(photons, 0))), 1e-12);
      EXPECT_NEAR(std::abs(ep(prod.index(photons, 3))), std::abs(ed(dicke.index(photons, 2))), 1e-12);
    }
  }
}

TEST(Operators, DickeBasisRejectsUnequalOffsets) {
  SpaceSpec s{2, 2, SpinBasis::DickeSymmetricReduced};
  EXPECT_THROW(build_h0(s, SystemParams{1.0, 0.0, {0.0, 1.0}}), std::invalid_argument);
}

TEST(States, NamedStatesAreNormalizedAndOrthogonal) {
  SpaceSpec s{4, 1};
  auto st = dicke_states(s);
  ASSERT_TRUE(st.A.has_value());
  EXPECT_NEAR(st.S.norm(), 1.0, 1e-14);
  EXPECT_NEAR(st.A->norm(), 1.0, 1e-14);
  // The staggered state is not orthogonal to |S>: <S|A> = -1/3.
  EXPECT_NEAR(st.S.dot(*st.A).real(), -1.0 / 3.0, 1e-14);
  EXPECT_NEAR(st.G(0).real(), 1.0, 0);
  EXPECT_NEAR(st.E(15).real(), 1.0, 0);
  EXPECT_THROW(named_spin_state(SpaceSpec{2, 1, SpinBasis::DickeSymmetricReduced}, "A"), std::invalid_argument);
  EXPECT_THROW(named_spin_state(s, "Q"), std::invalid_argument);
}

TEST(States, TwoSpinAntisymmetricIsSinglet) {
  SpaceSpec s{2, 1};
  Vector a = *dicke_states(s).A;
  // Spin 1 is the most significant bit: |ud> = 2, |du> = 1.
  EXPECT_NEAR(std::abs(a(2)), 1 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR((a(2) + a(1)).real(), 0.0, 1e-14);
  auto j = build_collective(s);
  const Vector k = product_ket(s, 0, a);
  EXPECT_LT((j.jplus.matrix * k).norm(), 1e-14);
  EXPECT_LT((j.jminus.matrix * k).norm(), 1e-14);
}

TEST(States, ProductKetOutOfRange) {
  SpaceSpec s{1, 2};
  EXPECT_THROW(product_ket(s, 3, dicke_states(SpaceSpec{2, 2}).G), std::out_of_range);
}

TEST(DensityMatrix, ValidateCatchesDefects) {
  SpaceSpec s{1, 1};
  Matrix m = Matrix::Identity(4, 4) / 4.0;
  EXPECT_NO_THROW(DensityMatrix(s, m).validate());
  EXPECT_THROW(DensityMatrix(s, 2.0 * m).validate(), std::invalid_argument);
  Matrix neg = m;
  neg(0, 0) = -0.25;
  neg(1, 1) = 0.75;
  EXPECT_THROW(DensityMatrix(s, neg).validate(), std::invalid_argument);
  Matrix nh = m;
  nh(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix(s, nh).validate(), std::invalid_argument);
  EXPECT_THROW(DensityMatrix(s, Matrix::Identity(3, 3)), std::invalid_argument);
}

TEST(PartialTrace, ProductStateFactors) {
  std::mt19937_64 rng(3);
  SpaceSpec s{2, 3};
  Matrix rc = random_density(s.fock_dim(), rng), rs = random_density(s.spin_dim(), rng);
  DensityMatrix rho(s, detail::kron(rc, rs));
  EXPECT_LT((partial_trace_cavity(rho) - rs).norm(), 1e-13);
  EXPECT_LT((partial_trace_spins(rho) - rc).norm(), 1e-13);
}

TEST(Expectation, MismatchedSpaces) {
  SpaceSpec a{1, 2}, b{1, 3};
  DensityMatrix rho = product_state(a, 0, Vector::Unit(2, 0));
  EXPECT_THROW(expectation(rho, build_number_op(b)), std::invalid_argument);
}

TEST(Leakage, TopTwoLevels) {
  SpaceSpec s{1, 4};
  Vector down = Vector::Unit(2, 0);
  EXPECT_NEAR(fock_leakage(product_state(s, 2, down)), 0.0, 0);
  EXPECT_NEAR(fock_leakage(product_state(s, 3, down)), 1.0, 1e-15);
  EXPECT_NEAR(fock_leakage(product_state(s, 4, down)), 1.0, 1e-15);
  EXPECT_NEAR(fock_leakage(product_state(SpaceSpec{1, 0}, 0, down)), 0.0, 0);
}
