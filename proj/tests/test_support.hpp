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

// Fixtures shared by the test binaries.

#include <algorithm>
#include <vector>

#include "sdlr/lindblad.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/random.hpp"

namespace sdlr::testing {

// Random Hamiltonian plus `ops` random jump operators on C^n.
inline LindbladGenerator random_generator(Index n, int ops, CounterRng& rng) {
  HermitianMatrix h = random_hermitian(n, rng);
  std::vector<CMat> ls;
  for (int k = 0; k < ops; ++k) ls.push_back(0.5 * random_complex_gaussian(n, n, rng));
  return LindbladGenerator(std::move(h), std::move(ls));
}

inline CVec random_vector(Index n, CounterRng& rng) {
  return random_complex_gaussian(n, 1, rng).col(0);
}

// Trace-one positive definite matrix.
inline HermitianMatrix random_density(Index n, CounterRng& rng) {
  const CMat g = random_complex_gaussian(n, n, rng);
  CMat rho = g * g.adjoint();
  rho /= rho.trace().real();
  return HermitianMatrix::from_hermitian_part(rho);
}

// Dense n^2 x n^2 matrix of the superoperator acting on column-stacked
// matrices.
template <typename Op>
CMat dense_superoperator(Index n, Op&& op) {
  CMat s(n * n, n * n);
  for (Index c = 0; c < n * n; ++c) {
    CMat e = CMat::Zero(n, n);
    e(c % n, c / n) = 1.0;
    const CMat out = op(e);
    s.col(c) = Eigen::Map<const CVec>(out.data(), n * n);
  }
  return s;
}

}  // namespace sdlr::testing
