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

// Error metrics, reference oracles and spectrum bookkeeping.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/sdlr.hpp"
#include "sdlr/time_grid.hpp"

namespace sdlr {

struct TrajectoryRecord {
  double t = 0.0;
  double rel_err_mean = 0.0;
  double rel_err_second = 0.0;
  std::vector<double> top_eigs;
  double residual_eps_sq = 0.0;
  double trace = 0.0;
  std::optional<double> gronwall_bound;
};

// Denominators below this are reported as flagged +inf.
inline constexpr double kRelativeErrorFloor = 1e-14;

struct RelativeErrors {
  double mean = 0.0;
  double second = 0.0;
  bool mean_undefined = false;
  bool second_undefined = false;
};

inline RelativeErrors relative_errors(const CVec& ref_mean, const CMat& ref_second,
                                      const MomentSummary& approx) {
  if (ref_mean.size() != approx.mean.size() ||
      ref_second.rows() != approx.second_moment.dim()) {
    throw DimensionError("relative_errors: reference and approximation differ in dimension");
  }
  RelativeErrors out;
  const double dm = ref_mean.norm();
  if (dm < kRelativeErrorFloor) {
    out.mean = std::numeric_limits<double>::infinity();
    out.mean_undefined = true;
  } else {
    out.mean = (ref_mean - approx.mean).norm() / dm;
  }
  const double ds = ref_second.norm();
  if (ds < kRelativeErrorFloor) {
    out.second = std::numeric_limits<double>::infinity();
    out.second_undefined = true;
  } else {
    out.second = (ref_second - approx.second_moment.matrix()).norm() / ds;
  }
  return out;
}

struct MomentSnapshot {
  double t;
  CVec mean;
  HermitianMatrix second;
};

// Closed moment equations of the linear SDE dX = Lambda X dt + sum_j Theta_j X dW_j:
//   dm/dt = Lambda m,  dM/dt = Lambda M + M Lambda^H + sum_j Theta_j M Theta_j^H,
// integrated with classical RK4. Snapshots at t = 0, every `stride` steps and
// the final time.
inline std::vector<MomentSnapshot> moment_ode_oracle(const CMat& lambda,
                                                     const std::vector<CMat>& thetas,
                                                     const CVec& m0,
                                                     const HermitianMatrix& second0,
                                                     double horizon, double dt,
                                                     std::int64_t stride = 1) {
  detail::require_square(lambda, "moment_ode_oracle");
  for (const CMat& th : thetas) detail::require_same_shape(lambda, th, "moment_ode_oracle");
  if (m0.size() != lambda.rows() || second0.dim() != lambda.rows()) {
    throw DimensionError("moment_ode_oracle: initial moments do not match Lambda");
  }
  const std::int64_t steps = step_count(horizon, dt);
  if (stride < 1) stride = 1;
  const CMat lambda_h = lambda.adjoint();
  auto mean_rate = [&](const CVec& m) -> CVec { return lambda * m; };
  auto second_rate = [&](const CMat& s) -> CMat {
    CMat out = lambda * s + s * lambda_h;
    for (const CMat& th : thetas) out += th * s * th.adjoint();
    return out;
  };

  std::vector<MomentSnapshot> out{{0.0, m0, second0}};
  CVec m = m0;
  CMat s = second0.matrix();
  for (std::int64_t k = 1; k <= steps; ++k) {
    const CVec a1 = mean_rate(m);
    const CVec a2 = mean_rate(m + 0.5 * dt * a1);
    const CVec a3 = mean_rate(m + 0.5 * dt * a2);
    const CVec a4 = mean_rate(m + dt * a3);
    m += (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);

    const CMat b1 = second_rate(s);
    const CMat b2 = second_rate(s + 0.5 * dt * b1);
    const CMat b3 = second_rate(s + 0.5 * dt * b2);
    const CMat b4 = second_rate(s + dt * b3);
    s = hermitian_part(s + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4));
    if (k % stride == 0 || k == steps) {
      out.push_back({static_cast<double>(k) * dt, m,
                     HermitianMatrix::from_hermitian_part(s)});
    }
  }
  return out;
}

// Finitely supported signed measure on C^n: atom k (column k) carries the
// real weight w_k.
struct SignedMeasure {
  CMat atoms;
  std::vector<double> weights;

  // integral of x x^H
  CMat second_moment() const {
    if (atoms.cols() != static_cast<Index>(weights.size())) {
      throw DimensionError("SignedMeasure: need one weight per atom");
    }
    CMat m = CMat::Zero(atoms.rows(), atoms.rows());
    for (Index k = 0; k < atoms.cols(); ++k) {
      m += weights[k] * atoms.col(k) * atoms.col(k).adjoint();
    }
    return m;
  }

  // integral of <x, O x>
  Complex integrate_observable(const CMat& obs) const {
    Complex acc{};
    for (Index k = 0; k < atoms.cols(); ++k) {
      acc += weights[k] * atoms.col(k).dot(obs * atoms.col(k));
    }
    return acc;
  }
};

enum class PseudometricForm {
  second_moment,  // || int x x^H d(nu1 - nu2) ||_HS
  observable,     // sup_{O = O^H, ||O||_HS <= 1} | int <x, O x> d(nu1 - nu2) |
};

// The observable form is evaluated at its maximizer O* = M / ||M||_HS with
// M = int x x^H d(nu1 - nu2).
inline double pseudometric(const SignedMeasure& nu1, const SignedMeasure& nu2,
                           PseudometricForm form) {
  if (nu1.atoms.rows() != nu2.atoms.rows()) {
    throw DimensionError("pseudometric: measures live on different spaces");
  }
  const CMat m = nu1.second_moment() - nu2.second_moment();
  if (form == PseudometricForm::second_moment) return m.norm();
  const double mn = m.norm();
  if (mn == 0.0) return 0.0;
  const CMat obs = hermitian_part(m) / mn;
  return std::abs(nu1.integrate_observable(obs) - nu2.integrate_observable(obs));
}

// Top-k eigenvalues of each snapshot, descending.
inline std::vector<std::vector<double>> spectrum_trajectory(
    std::span<const HermitianMatrix> snapshots, Index k) {
  std::vector<std::vector<double>> out;
  out.reserve(snapshots.size());
  for (const HermitianMatrix& s : snapshots) out.push_back(top_spectrum(s, k));
  return out;
}

// G restricted to Q_U G P_U + h.c.
inline HermitianMatrix restrict_generator(const StiefelFrame& u, const CMat& g) {
  const auto pr = projectors(u);
  const CMat qgp = pr.complement.matrix() * g * pr.range.matrix();
  return HermitianMatrix::from_hermitian_part(qgp + qgp.adjoint());
}

// || U^H V + V^H U ||_HS; zero exactly on the Stiefel tangent space at U.
inline double stiefel_tangent_defect(const StiefelFrame& u, const CMat& v) {
  const CMat& m = u.matrix();
  return (m.adjoint() * v + v.adjoint() * m).norm();
}

// Monte Carlo standard error (HS norm) of the empirical second moment of the
// columns of `states`: sqrt((E|x|^4 - ||E[x x^H]||^2) / N). Reduced states
// give the same value as the full states U Y.
inline double second_moment_standard_error(const CMat& states) {
  const Index ns = states.cols();
  if (ns == 0) return 0.0;
  const CMat second = detail::column_moments(states).second;
  double fourth = 0.0;
  for (Index i = 0; i < ns; ++i) {
    const double q = states.col(i).squaredNorm();
    fourth += q * q;
  }
  fourth /= static_cast<double>(ns);
  const double var = std::max(0.0, fourth - second.squaredNorm());
  return std::sqrt(var / static_cast<double>(ns));
}

}  // namespace sdlr
