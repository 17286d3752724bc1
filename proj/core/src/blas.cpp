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

#include "ttic/blas.hpp"

#include <Eigen/Core>

namespace ttic::detail {

namespace {

template <typename T>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k, T alpha,
               const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<const Mat>;
  Eigen::Map<Mat> cm(c, m, n);
  Map am(a, trans_a ? k : m, trans_a ? m : k);
  Map bm(b, trans_b ? n : k, trans_b ? k : n);
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (beta == T(0)) {
      cm.noalias() = alpha * (lhs * rhs);
    } else {
      cm *= beta;
      cm.noalias() += alpha * (lhs * rhs);
    }
  };
  if (!trans_a && !trans_b) {
    run(am, bm);
  } else if (trans_a && !trans_b) {
    run(am.transpose(), bm);
  } else if (!trans_a && trans_b) {
    run(am, bm.transpose());
  } else {
    run(am.transpose(), bm.transpose());
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, const float* b, float beta, float* c) {
  gemm_impl(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  gemm_impl(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
}

}  // namespace ttic::detail
