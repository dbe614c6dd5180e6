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

// Dynamically orthogonal (DO) baseline: X = Xbar + U Y with E[Y] = 0,
//
//   dXbar/dt = E[a]
//   dU/dt    = Q_U E[a Y^H] E[Y Y^H]^+
//   dY       = U^H (a - E[a]) dt + sum_j U^H b_j dW_j,
//
// all evaluated at X = Xbar + U Y. Stepping mirrors sdlr_step: pre-step
// moments, Euler-Maruyama in Y (re-centered afterwards), Euler plus polar
// retraction in U, Euler in Xbar.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/models.hpp"
#include "sdlr/parallel.hpp"
#include "sdlr/sdlr.hpp"

namespace sdlr {

struct DoState {
  double t = 0.0;
  std::uint64_t step = 0;
  CVec mean;
  StiefelFrame frame;  // may have rank 0 (mean-only approximation)
  CMat ensemble;       // r x N_s, empirical mean zero

  Index dim() const noexcept { return mean.size(); }
  Index rank() const noexcept { return frame.rank(); }
  Index samples() const noexcept { return ensemble.cols(); }

  CMat states() const {
    return (frame.matrix() * ensemble).colwise() + mean;
  }
};

namespace detail {

inline void recenter(CMat& y) {
  if (y.cols() == 0 || y.rows() == 0) return;
  const CVec m = column_moments(y).first;
  y.colwise() -= m;
}

}  // namespace detail

inline DoState do_init(const CMat& samples, Index rank) {
  const Index n = samples.rows();
  if (rank < 0 || rank > n) {
    throw DomainError("do_init: rank " + std::to_string(rank) + " outside [0, " +
                      std::to_string(n) + "]");
  }
  if (samples.cols() < 1) throw DomainError("do_init: need at least one sample");
  detail::require_finite(samples, "do_init");
  DoState state;
  state.mean = detail::column_moments(samples).first;
  const CMat centered = samples.colwise() - state.mean;
  const CMat cov = detail::column_moments(centered).second;
  state.frame = StiefelFrame(hermitian_eigen(cov).vectors.leftCols(rank));
  state.ensemble = state.frame.matrix().adjoint() * centered;
  detail::recenter(state.ensemble);
  return state;
}

inline DoState do_step(const DoState& state, const SdeModel& model, double dt,
                       const RMat& noise, const StepOptions& options = {}) {
  const Index n = state.dim();
  const Index r = state.rank();
  const Index ns = state.samples();
  const Index channels = model.num_channels();
  if (model.dim() != n) throw DimensionError("do_step: model dimension mismatch");
  if (!(dt > 0.0)) throw DomainError("do_step: dt must be positive");
  if (noise.rows() != ns || noise.cols() != channels) {
    throw DimensionError("do_step: noise must be " + std::to_string(ns) + " x " +
                         std::to_string(channels));
  }
  const CMat& u = state.frame.matrix();
  const CMat uh = u.adjoint();
  const double sq = std::sqrt(dt);

  const Index chunks = chunk_count(ns);
  std::vector<CVec> part_mean(static_cast<std::size_t>(chunks));
  std::vector<CMat> part_s(static_cast<std::size_t>(chunks));
  std::vector<CMat> part_a(static_cast<std::size_t>(chunks));
  // U^H a and U^H sum_j b_j xi_j; the centering by U^H E[a] needs the full
  // reduction and is applied afterwards.
  CMat next(r, ns);

  parallel_chunks(ns, [&](Index c, Index b, Index e) {
    const Index m = e - b;
    const auto y = state.ensemble.middleCols(b, m);
    const CMat x = (u * y).colwise() + state.mean;
    CMat a;
    std::vector<CMat> bs;
    detail::with_sample_offset(b, [&] {
      a = model.drift(x, state.t);
      bs = model.diffusion(x, state.t);
    });
    part_mean[c] = a.rowwise().sum();
    part_s[c] = y * y.adjoint();
    part_a[c] = a * y.adjoint();

    CMat y_next = y + dt * (uh * a);
    for (Index j = 0; j < channels; ++j) {
      const RVec xi = sq * noise.block(b, j, m, 1);
      y_next += (uh * bs[j]) * xi.cast<Complex>().asDiagonal();
    }
    next.middleCols(b, m) = y_next;
  });

  CVec ea = CVec::Zero(n);
  CMat s = CMat::Zero(r, r);
  CMat ma = CMat::Zero(n, r);
  for (Index c = 0; c < chunks; ++c) {
    ea += part_mean[c];
    s += part_s[c];
    ma += part_a[c];
  }
  const double inv_ns = 1.0 / static_cast<double>(ns);
  ea *= inv_ns;
  s = hermitian_part(s * inv_ns);
  ma *= inv_ns;

  next.colwise() -= dt * (uh * ea);
  detail::recenter(next);
  if (!next.allFinite()) {
    for (Index i = 0; i < ns; ++i) {
      if (!next.col(i).allFinite()) {
        throw NumericError("do_step: non-finite reduced state for sample " +
                               std::to_string(i),
                           static_cast<long>(i));
      }
    }
  }

  DoState out;
  out.t = state.t + dt;
  out.step = state.step + 1;
  out.mean = state.mean + dt * ea;
  out.ensemble = std::move(next);
  if (r == 0 || r == n) {
    out.frame = state.frame;
    return out;
  }
  // A degenerate ensemble (E[YY^H] = 0) leaves the frame frozen.
  const CMat s_pinv = pinv_psd(s, options.pinv_tolerance).matrix();
  const CMat du = complement_apply(state.frame, ma) * s_pinv;
  out.frame = retract_to_stiefel(u + dt * du);
  return out;
}

inline DoState do_advance(const DoState& state, const SdeModel& model, double dt,
                          const NoiseSource& noise, const StepOptions& options = {}) {
  return do_step(state, model, dt,
                 draw_noise(noise, state.samples(), state.step, model.num_channels()),
                 options);
}

// mean = Xbar, second moment = Xbar Xbar^H + U E[Y Y^H] U^H.
inline MomentSummary do_moments(const DoState& state) {
  const CMat reduced = detail::column_moments(state.ensemble).second;
  const CMat& u = state.frame.matrix();
  MomentSummary out;
  out.mean = state.mean;
  out.reduced_second = HermitianMatrix::from_hermitian_part(reduced);
  out.second_moment = HermitianMatrix::from_hermitian_part(
      state.mean * state.mean.adjoint() + u * reduced * u.adjoint());
  return out;
}

}  // namespace sdlr
