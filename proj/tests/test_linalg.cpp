// Copyright 2026 The sdlr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>

#include "sdlr/linalg.hpp"

using namespace sdlr;

namespace {

CMat diag(std::initializer_list<double> d) {
  CMat m = CMat::Zero(static_cast<Index>(d.size()), static_cast<Index>(d.size()));
  Index i = 0;
  for (double v : d) {
    m(i, i) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST(HsInner, NormOfIdentityAndDiagonal) {
  EXPECT_NEAR(hs_norm(CMat::Identity(2, 2)), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(hs_norm(diag({3, 4})), 5.0, 1e-15);
}

TEST(HsInner, SelfInnerProductIsRealNonnegative) {
  CounterRng rng(11);
  for (int k = 0; k < 20; ++k) {
    const CMat a = random_complex_gaussian(4, 3, rng);
    const Complex ip = hs_inner(a, a);
    EXPECT_EQ(ip.imag(), 0.0);
    EXPECT_GE(ip.real(), 0.0);
    EXPECT_NEAR(std::sqrt(ip.real()), hs_norm(a), 1e-13);
  }
}

TEST(HsInner, ConjugateLinearInFirstSlot) {
  CMat a = CMat::Zero(1, 1), b = CMat::Zero(1, 1);
  a(0, 0) = kI;
  b(0, 0) = 1.0;
  EXPECT_EQ(hs_inner(a, b), -kI);
}

TEST(HsInner, ShapeMismatchThrows) {
  EXPECT_THROW(hs_inner(CMat::Zero(2, 2), CMat::Zero(2, 3)), DimensionError);
}

TEST(Commutator, HandComputation) {
  const CMat z = diag({1, -1});
  CMat x(2, 2);
  x << 0, 1, 1, 0;
  CMat expected(2, 2);
  expected << 0, 2, -2, 0;
  EXPECT_LT((commutator(z, x) - expected).norm(), 1e-15);
}

TEST(Commutator, SelfAndIdentityCases) {
  CounterRng rng(3);
  const CMat a = random_complex_gaussian(3, 3, rng);
  EXPECT_LT(commutator(a, a).norm(), 1e-14);
  EXPECT_LT((anticommutator(CMat::Identity(3, 3), a) - 2.0 * a).norm(), 1e-14);
}

TEST(Commutator, DimensionErrors) {
  EXPECT_THROW(commutator(CMat::Zero(2, 2), CMat::Zero(3, 3)), DimensionError);
  EXPECT_THROW(anticommutator(CMat::Zero(2, 3), CMat::Zero(2, 3)), DimensionError);
}

TEST(HermitianMatrixType, RejectsNonHermitian) {
  CMat m(2, 2);
  m << 1, 1, 0, 1;
  EXPECT_THROW(HermitianMatrix{m}, DomainError);
  EXPECT_THROW(HermitianMatrix{CMat::Zero(2, 3)}, DimensionError);
}

TEST(HermitianMatrixType, AcceptsRoundoffAndStoresExactHermitian) {
  CMat m(2, 2);
  m << 1, Complex(2, 1), Complex(2, -1 + 1e-14), 3;
  const HermitianMatrix h(m);
  EXPECT_EQ((h.matrix() - h.matrix().adjoint()).norm(), 0.0);
  EXPECT_DOUBLE_EQ(h.trace(), 4.0);
}

TEST(StiefelFrameType, Invariants) {
  EXPECT_THROW(StiefelFrame(CMat::Identity(2, 3)), DimensionError);
  EXPECT_THROW(StiefelFrame(2.0 * CMat::Identity(3, 2)), DomainError);
  const StiefelFrame u = StiefelFrame::canonical(4, 2);
  EXPECT_EQ(u.ambient_dim(), 4);
  EXPECT_EQ(u.rank(), 2);
  EXPECT_EQ(u.defect(), 0.0);
}

TEST(Projectors, CanonicalFrame) {
  const auto pr = projectors(StiefelFrame::canonical(4, 2));
  EXPECT_LT((pr.range.matrix() - diag({1, 1, 0, 0})).norm(), 1e-15);
  EXPECT_LT((pr.complement.matrix() - diag({0, 0, 1, 1})).norm(), 1e-15);
}

TEST(Projectors, IdempotentAndComplementary) {
  CounterRng rng(5);
  for (int k = 0; k < 10; ++k) {
    const StiefelFrame u = random_stiefel(6, 3, rng);
    const auto pr = projectors(u);
    const CMat& p = pr.range.matrix();
    const CMat& q = pr.complement.matrix();
    EXPECT_LT((p * p - p).norm(), 1e-10);
    EXPECT_LT((q * q - q).norm(), 1e-10);
    EXPECT_LT((q * p).norm(), 1e-12);
    EXPECT_LT((p + q - CMat::Identity(6, 6)).norm(), 1e-12);
    EXPECT_LT((complement_apply(u, CMat::Identity(6, 6)) - q).norm(), 1e-12);
  }
}

TEST(Projectors, FullRankComplementIsZero) {
  CounterRng rng(6);
  const StiefelFrame u = random_stiefel(5, 5, rng);
  const auto pr = projectors(u);
  EXPECT_EQ(pr.complement.matrix().norm(), 0.0);
  EXPECT_EQ(complement_apply(u, CMat::Ones(5, 2)).norm(), 0.0);
}

TEST(PinvPsd, HandCases) {
  EXPECT_LT((pinv_psd(diag({4, 0})).matrix() - diag({0.25, 0})).norm(), 1e-15);
  EXPECT_LT((pinv_psd(diag({1, 1e-14}), 1e-8).matrix() - diag({1, 0})).norm(), 1e-15);
  EXPECT_EQ(pinv_psd(CMat::Zero(3, 3)).matrix().norm(), 0.0);
}

TEST(PinvPsd, InverseOfWellConditioned) {
  CounterRng rng(8);
  const CMat g = random_complex_gaussian(5, 5, rng);
  const CMat m = g * g.adjoint() + CMat::Identity(5, 5);
  EXPECT_LT((m * pinv_psd(m).matrix() - CMat::Identity(5, 5)).norm(), 1e-10);
}

TEST(PinvPsd, PenroseIdentitiesOnRankDeficient) {
  CounterRng rng(9);
  for (int k = 0; k < 10; ++k) {
    const CMat g = random_complex_gaussian(6, 3, rng);
    const CMat m = g * g.adjoint();
    const CMat mp = pinv_psd(m).matrix();
    EXPECT_LT((m * mp * m - m).norm(), 1e-9 * m.norm());
    EXPECT_LT((mp * m * mp - mp).norm(), 1e-9 * std::max(1.0, mp.norm()) * m.norm());
  }
}

TEST(PinvPsd, RejectsIndefinite) {
  EXPECT_THROW(pinv_psd(diag({1, -0.5})), DomainError);
  EXPECT_THROW(pinv_psd(diag({1}), -1.0), DomainError);
  EXPECT_NO_THROW(pinv_psd(diag({1, -1e-12})));
}

TEST(Retraction, FixedPointAndScaling) {
  CounterRng rng(12);
  const StiefelFrame u = random_stiefel(7, 3, rng);
  EXPECT_LT((retract_to_stiefel(u.matrix()).matrix() - u.matrix()).norm(), 1e-12);
  EXPECT_LT((retract_to_stiefel(2.0 * CMat::Identity(5, 2)).matrix() - CMat::Identity(5, 2))
                .norm(),
            1e-12);
}

TEST(Retraction, OrthonormalAndIdempotent) {
  CounterRng rng(13);
  for (int k = 0; k < 20; ++k) {
    const CMat m = random_complex_gaussian(8, 4, rng);
    const StiefelFrame u = retract_to_stiefel(m);
    EXPECT_LT(u.defect(), 1e-12);
    EXPECT_LT((retract_to_stiefel(u.matrix()).matrix() - u.matrix()).norm(), 1e-12);
    // Polar factor: U^H M is Hermitian positive definite.
    const CMat h = u.matrix().adjoint() * m;
    EXPECT_LT((h - h.adjoint()).norm(), 1e-12 * h.norm());
    EXPECT_GT(hermitian_eigen(h).values.minCoeff(), 0.0);
  }
}

TEST(Retraction, RankDeficientThrows) {
  CMat m = CMat::Zero(4, 2);
  m(0, 0) = 1.0;
  m(0, 1) = 2.0;
  EXPECT_THROW(retract_to_stiefel(m), RankError);
  EXPECT_THROW(retract_to_stiefel(CMat::Zero(2, 3)), DimensionError);
}

TEST(TopSpectrum, DiagonalAndRankOne) {
  const auto s = top_spectrum(diag({3, 1, 2}), 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0], 3.0, 1e-14);
  EXPECT_NEAR(s[1], 2.0, 1e-14);

  CVec x(3);
  x << Complex(1, 2), 0.5, Complex(0, -1);
  const auto r1 = top_spectrum(x * x.adjoint(), 2);
  EXPECT_NEAR(r1[0], x.squaredNorm(), 1e-12);
  EXPECT_NEAR(r1[1], 0.0, 1e-12);
  EXPECT_THROW(top_spectrum(diag({1, 2}), 3), DimensionError);
}

TEST(TopSpectrum, UnitaryInvarianceAndTrace) {
  CounterRng rng(14);
  const HermitianMatrix m = random_hermitian(6, rng);
  const CMat v = random_stiefel(6, 6, rng).matrix();
  const auto a = top_spectrum(m, 6);
  const auto b = top_spectrum(v * m.matrix() * v.adjoint(), 6);
  double sum = 0.0;
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-10);
    if (i > 0) {
      EXPECT_GE(a[i - 1], a[i]);
    }
    sum += a[i];
  }
  EXPECT_NEAR(sum, m.trace(), 1e-9 * m.matrix().norm());
}

TEST(HermitianEigen, PhaseConvention) {
  CounterRng rng(15);
  const HermitianMatrix m = random_hermitian(5, rng);
  const auto eig = hermitian_eigen(m);
  for (Index k = 0; k < 5; ++k) {
    const CVec v = eig.vectors.col(k);
    Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    EXPECT_NEAR(v(pivot).imag(), 0.0, 1e-14);
    EXPECT_GT(v(pivot).real(), 0.0);
  }
  const CMat recon =
      eig.vectors * eig.values.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
  EXPECT_LT((recon - m.matrix()).norm(), 1e-12);
}

TEST(RandomFixtures, DeterministicAndValid) {
  CounterRng a(42), b(42);
  const StiefelFrame ua = random_stiefel(6, 4, a);
  const StiefelFrame ub = random_stiefel(6, 4, b);
  EXPECT_EQ((ua.matrix() - ub.matrix()).norm(), 0.0);
  EXPECT_LT(ua.defect(), 1e-12);

  CounterRng c(43);
  const CMat q = random_stiefel(5, 5, c).matrix();
  EXPECT_LT((q * q.adjoint() - CMat::Identity(5, 5)).norm(), 1e-12);

  const HermitianMatrix h = random_hermitian(4, c);
  EXPECT_EQ((h.matrix() - h.matrix().adjoint()).norm(), 0.0);
  EXPECT_THROW(random_stiefel(2, 3, c), DimensionError);
}

TEST(CounterRngTest, ForksAreIndependentAndNormalMomentsMatch) {
  CounterRng rng(7);
  CounterRng f1 = rng.fork(1), f2 = rng.fork(2);
  EXPECT_NE(f1.next_u64(), f2.next_u64());
  double s1 = 0.0, s2 = 0.0;
  const int count = 200000;
  for (int i = 0; i < count; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / count, 0.0, 4.0 / std::sqrt(count));
  EXPECT_NEAR(s2 / count, 1.0, 4.0 * std::sqrt(2.0 / count));
}
