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

#pragma once

// Dense complex linear algebra shared by every module: Hilbert-Schmidt
// geometry, projectors onto frames, PSD pseudo-inverse, polar retraction
// onto the Stiefel manifold and sorted Hermitian spectra.
//
// Inner products are conjugate-linear in the first slot everywhere:
// <u, v> = u^H v.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/random.hpp"

namespace sdlr {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

namespace detail {

inline std::string shape(const CMat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const CMat& a, const CMat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) +
                         " vs " + shape(b));
  }
}

inline void require_square(const CMat& a, const char* op) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(op) + ": expected square matrix, got " +
                         shape(a));
  }
}

inline void require_finite(const CMat& a, const char* op) {
  if (!a.allFinite()) {
    throw NumericError(std::string(op) + ": non-finite entries");
  }
}

}  // namespace detail

// Sum_ij conj(A_ij) B_ij.
inline Complex hs_inner(const CMat& a, const CMat& b) {
  detail::require_same_shape(a, b, "hs_inner");
  return a.conjugate().cwiseProduct(b).sum();
}

inline double hs_norm(const CMat& a) { return a.norm(); }

inline CMat commutator(const CMat& a, const CMat& b) {
  detail::require_square(a, "commutator");
  detail::require_same_shape(a, b, "commutator");
  return a * b - b * a;
}

inline CMat anticommutator(const CMat& a, const CMat& b) {
  detail::require_square(a, "anticommutator");
  detail::require_same_shape(a, b, "anticommutator");
  return a * b + b * a;
}

// (M + M^H) / 2.
inline CMat hermitian_part(const CMat& m) {
  detail::require_square(m, "hermitian_part");
  return 0.5 * (m + m.adjoint());
}

inline double spectral_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

// Square matrix equal to its conjugate transpose. The stored entries are
// exactly Hermitian; construction checks the input is close to Hermitian.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  explicit HermitianMatrix(const CMat& m) {
    detail::require_square(m, "HermitianMatrix");
    detail::require_finite(m, "HermitianMatrix");
    const double defect = (m - m.adjoint()).norm();
    if (defect > 1e-12 * std::max(1.0, m.norm())) {
      throw DomainError("HermitianMatrix: input is not Hermitian (defect " +
                        std::to_string(defect) + ")");
    }
    m_ = 0.5 * (m + m.adjoint());
  }

  // Hermitian part of an arbitrary square matrix, no closeness check.
  static HermitianMatrix from_hermitian_part(const CMat& m) {
    HermitianMatrix h;
    h.m_ = hermitian_part(m);
    return h;
  }

  static HermitianMatrix zero(Index dim) {
    HermitianMatrix h;
    h.m_ = CMat::Zero(dim, dim);
    return h;
  }

  static HermitianMatrix identity(Index dim) {
    HermitianMatrix h;
    h.m_ = CMat::Identity(dim, dim);
    return h;
  }

  Index dim() const noexcept { return m_.rows(); }
  const CMat& matrix() const noexcept { return m_; }
  operator const CMat&() const noexcept { return m_; }

  double trace() const { return m_.trace().real(); }

 private:
  CMat m_;
};

// n x r matrix with orthonormal columns.
class StiefelFrame {
 public:
  static constexpr double kTolerance = 1e-10;

  StiefelFrame() = default;

  explicit StiefelFrame(CMat u) : u_(std::move(u)) {
    if (u_.cols() > u_.rows()) {
      throw DimensionError("StiefelFrame: rank " + std::to_string(u_.cols()) +
                           " exceeds ambient dimension " +
                           std::to_string(u_.rows()));
    }
    detail::require_finite(u_, "StiefelFrame");
    const double d = defect();
    if (d > kTolerance) {
      throw DomainError("StiefelFrame: columns not orthonormal (defect " +
                        std::to_string(d) + ")");
    }
  }

  // First r columns of the n x n identity.
  static StiefelFrame canonical(Index n, Index r) {
    return StiefelFrame(CMat::Identity(n, r));
  }

  Index ambient_dim() const noexcept { return u_.rows(); }
  Index rank() const noexcept { return u_.cols(); }
  const CMat& matrix() const noexcept { return u_; }
  operator const CMat&() const noexcept { return u_; }

  // ||U^H U - Id||_HS
  double defect() const {
    return (u_.adjoint() * u_ - CMat::Identity(u_.cols(), u_.cols())).norm();
  }

 private:
  CMat u_;
};

struct Projectors {
  HermitianMatrix range;       // P_U = U U^H
  HermitianMatrix complement;  // Q_U = Id - P_U
};

// Q_U is exactly zero when the frame is square.
inline Projectors projectors(const StiefelFrame& u) {
  const Index n = u.ambient_dim();
  const CMat p = u.matrix() * u.matrix().adjoint();
  if (u.rank() == n) {
    return {HermitianMatrix::from_hermitian_part(p), HermitianMatrix::zero(n)};
  }
  return {HermitianMatrix::from_hermitian_part(p),
          HermitianMatrix::from_hermitian_part(CMat::Identity(n, n) - p)};
}

// Q_U M computed as M - U (U^H M), never forming the n x n projector.
inline CMat complement_apply(const StiefelFrame& u, const CMat& m) {
  if (u.rank() == u.ambient_dim()) return CMat::Zero(m.rows(), m.cols());
  return m - u.matrix() * (u.matrix().adjoint() * m);
}

struct EigenDecomposition {
  RVec values;   // descending
  CMat vectors;  // columns match values
};

// Eigendecomposition with eigenvalues sorted in descending order. Each
// eigenvector is scaled so that its largest-modulus component (first such
// index on ties) is real and positive.
inline EigenDecomposition hermitian_eigen(const CMat& m) {
  detail::require_square(m, "hermitian_eigen");
  detail::require_finite(m, "hermitian_eigen");
  const Index n = m.rows();
  EigenDecomposition out{RVec(n), CMat(n, n)};
  if (n == 0) return out;

  Eigen::SelfAdjointEigenSolver<CMat> solver(hermitian_part(m));
  if (solver.info() != Eigen::Success) {
    throw NumericError("hermitian_eigen: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  for (Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    CVec v = solver.eigenvectors().col(n - 1 - k);
    Index pivot = 0;
    double best = -1.0;
    for (Index i = 0; i < n; ++i) {
      const double a = std::abs(v(i));
      if (a > best) {
        best = a;
        pivot = i;
      }
    }
    if (best > 0.0) v *= std::conj(v(pivot)) / best;
    out.vectors.col(k) = v;
  }
  return out;
}

// k largest eigenvalues, descending.
inline std::vector<double> top_spectrum(const CMat& m, Index k) {
  detail::require_square(m, "top_spectrum");
  if (k < 0 || k > m.rows()) {
    throw DimensionError("top_spectrum: k = " + std::to_string(k) +
                         " exceeds dimension " + std::to_string(m.rows()));
  }
  Eigen::SelfAdjointEigenSolver<CMat> solver(hermitian_part(m),
                                             Eigen::EigenvaluesOnly);
  const Index n = m.rows();
  std::vector<double> out(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) out[i] = solver.eigenvalues()(n - 1 - i);
  return out;
}

inline constexpr double kDefaultPinvTolerance = 1e-8;

// Pseudo-inverse of a positive semidefinite matrix. Eigenvalues at or below
// rel_tol * lambda_max are dropped. Inputs with eigenvalues below
// -1e-10 * max|lambda| are rejected.
inline HermitianMatrix pinv_psd(const CMat& m,
                                double rel_tol = kDefaultPinvTolerance) {
  detail::require_square(m, "pinv_psd");
  if (rel_tol < 0.0) throw DomainError("pinv_psd: rel_tol must be >= 0");
  const Index n = m.rows();
  if (n == 0) return HermitianMatrix::zero(0);

  const EigenDecomposition eig = hermitian_eigen(m);
  const double lmax = eig.values(0);
  const double lmin = eig.values(n - 1);
  const double scale = std::max(std::abs(lmax), std::abs(lmin));
  if (scale == 0.0) return HermitianMatrix::zero(n);
  if (lmin < -1e-10 * scale) {
    throw DomainError("pinv_psd: matrix is indefinite (lambda_min = " +
                      std::to_string(lmin) +
                      ", lambda_max = " + std::to_string(lmax) + ")");
  }
  if (lmax <= 0.0) return HermitianMatrix::zero(n);

  const double cutoff = rel_tol * lmax;
  RVec inv = RVec::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (eig.values(i) > cutoff) inv(i) = 1.0 / eig.values(i);
  }
  const CMat out =
      eig.vectors * inv.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
  return HermitianMatrix::from_hermitian_part(out);
}

// Orthonormal polar factor of a full-column-rank n x r matrix:
// M = W S V^H  ->  U = W V^H.
inline StiefelFrame retract_to_stiefel(const CMat& m) {
  if (m.cols() > m.rows()) {
    throw DimensionError("retract_to_stiefel: more columns than rows (" +
                         detail::shape(m) + ")");
  }
  detail::require_finite(m, "retract_to_stiefel");
  if (m.cols() == 0) return StiefelFrame(m);

  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;
  if (smax == 0.0 || smin <= tol) {
    throw RankError("retract_to_stiefel: matrix is rank deficient (sigma_min = " +
                    std::to_string(smin) +
                    ", sigma_max = " + std::to_string(smax) + ")");
  }
  return StiefelFrame(svd.matrixU() * svd.matrixV().adjoint());
}

// Entries with independent N(0, 1/2) real and imaginary parts.
inline CMat random_complex_gaussian(Index rows, Index cols, CounterRng& rng) {
  CMat g(rows, cols);
  const double s = std::sqrt(0.5);
  // Column-major fill keeps the draw order fixed.
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, j) = Complex(s * re, s * im);
    }
  }
  return g;
}

inline StiefelFrame random_stiefel(Index n, Index r, CounterRng& rng) {
  if (r > n || r < 0) {
    throw DimensionError("random_stiefel: need 0 <= r <= n, got r = " +
                         std::to_string(r) + ", n = " + std::to_string(n));
  }
  return retract_to_stiefel(random_complex_gaussian(n, r, rng));
}

inline HermitianMatrix random_hermitian(Index n, CounterRng& rng) {
  return HermitianMatrix::from_hermitian_part(random_complex_gaussian(n, n, rng));
}

}  // namespace sdlr
