// Copyright (c) the ttic project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TTIC_BLAS_HPP_
#define TTIC_BLAS_HPP_

#include <cstdint>

namespace ttic::detail {

// C = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is (m, k), op(B) is (k, n), C is (m, n).
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, const float* b, float beta, float* c);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, const double* b, double beta, double* c);

}  // namespace ttic::detail

#endif  // TTIC_BLAS_HPP_
