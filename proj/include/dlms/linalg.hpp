// Copyright 2026 The deeplms Authors
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

#ifndef DLMS_LINALG_HPP
#define DLMS_LINALG_HPP

#include <Eigen/Dense>
#include <complex>

namespace dlms {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Scalar field the adaptive filter operates over. It selects the constant q
/// in the coefficient-MSE propagation: q = 1/2 for complex LMS, q = 1 for
/// LMS over the reals.
enum class Field { complex_lms, real_lms };

inline double field_q(Field f) { return f == Field::complex_lms ? 0.5 : 1.0; }

inline double db_from_linear(double x, double floor_db = -60.0) {
  if (x <= 0.0) return floor_db;
  double db = 10.0 * std::log10(x);
  return db < floor_db ? floor_db : db;
}

inline double linear_from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace dlms

#endif  // DLMS_LINALG_HPP
