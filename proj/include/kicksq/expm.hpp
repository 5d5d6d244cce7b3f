#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "kicksq/errors.hpp"

namespace kicksq {

/// Exponential of a small dense matrix, exp(a * t).
///
/// Scaling and squaring with the degree-13 Pade approximant (Higham 2005).
/// The scaling exponent is chosen from the 1-norm so that the scaled matrix
/// has norm at most 5.37, where the degree-13 approximant is accurate to
/// double precision. Returns the identity exactly for t == 0.
template <int N>
Eigen::Matrix<double, N, N> matrix_exponential(
    const Eigen::Matrix<double, N, N>& a, double t) {
  using Mat = Eigen::Matrix<double, N, N>;
  if (!std::isfinite(t) || t < 0.0) {
    throw InvalidArgument("matrix_exponential: time must be finite and >= 0");
  }
  if (!a.allFinite()) {
    throw InvalidArgument("matrix_exponential: matrix has non-finite entries");
  }
  if (t == 0.0) return Mat::Identity();

  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  static constexpr double theta13 = 5.371920351148152;

  Mat x = a * t;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    x = x * std::ldexp(1.0, -squarings);
  }

  const Mat id = Mat::Identity();
  const Mat x2 = x * x;
  const Mat x4 = x2 * x2;
  const Mat x6 = x4 * x2;
  const Mat u_inner = b[13] * x6 + b[11] * x4 + b[9] * x2;
  const Mat u = x * (x6 * u_inner + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
  const Mat v_inner = b[12] * x6 + b[10] * x4 + b[8] * x2;
  const Mat v = x6 * v_inner + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

}  // namespace kicksq
