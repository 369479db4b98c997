#include "transmot/kalman.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>

namespace transmot {

namespace {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

Mat8 to_eigen_cov(const KalmanState& s) {
  Mat8 p;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) p(i, j) = s.covariance[i * 8 + j];
  return p;
}

void from_eigen(const Vec8& mean, const Mat8& cov, KalmanState& s) {
  // Force exact symmetry so PSD checks downstream stay clean.
  const Mat8 sym = 0.5 * (cov + cov.transpose());
  for (int i = 0; i < 8; ++i) {
    s.mean[i] = mean(i);
    for (int j = 0; j < 8; ++j) s.covariance[i * 8 + j] = sym(i, j);
  }
}

Vec4 process_std(double h, const KalmanNoise& noise) {
  const double p = noise.position_std_factor * h;
  return {p, p, p, p};
}

}  // namespace

KalmanState kalman_init(const BoundingBox& box, const KalmanNoise& noise) {
  KalmanState s;
  s.mean = {box.cx(), box.cy(), box.w, box.h, 0, 0, 0, 0};
  const double p = 2.0 * noise.position_std_factor * box.h;
  const double v = 10.0 * noise.velocity_std_factor * box.h;
  Mat8 cov = Mat8::Zero();
  for (int i = 0; i < 4; ++i) {
    cov(i, i) = p * p;
    cov(4 + i, 4 + i) = v * v;
  }
  Vec8 mean;
  for (int i = 0; i < 8; ++i) mean(i) = s.mean[i];
  from_eigen(mean, cov, s);
  return s;
}

KalmanState kalman_predict(const KalmanState& s, const KalmanNoise& noise) {
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, 4 + i) = 1.0;  // dt = 1 frame

  Vec8 mean;
  for (int i = 0; i < 8; ++i) mean(i) = s.mean[i];
  const Mat8 cov = to_eigen_cov(s);

  const double h = std::max(s.mean[3], 1.0);
  const Vec4 ps = process_std(h, noise);
  const double vs = noise.velocity_std_factor * h;
  Mat8 q = Mat8::Zero();
  for (int i = 0; i < 4; ++i) {
    q(i, i) = ps(i) * ps(i);
    q(4 + i, 4 + i) = vs * vs;
  }

  KalmanState out = s;
  from_eigen(f * mean, f * cov * f.transpose() + q, out);
  return out;
}

KalmanState kalman_update(const KalmanState& s, const BoundingBox& z, const KalmanNoise& noise) {
  Mat48 hmat = Mat48::Zero();
  for (int i = 0; i < 4; ++i) hmat(i, i) = 1.0;

  Vec8 mean;
  for (int i = 0; i < 8; ++i) mean(i) = s.mean[i];
  const Mat8 cov = to_eigen_cov(s);

  const double h = std::max(s.mean[3], 1.0);
  const double ms = noise.position_std_factor * h;
  Mat4 r = Mat4::Identity() * (ms * ms);

  Vec4 meas(z.cx(), z.cy(), z.w, z.h);
  const Vec4 innovation = meas - hmat * mean;
  Mat4 innov_cov = hmat * cov * hmat.transpose() + r;

  Eigen::LLT<Mat4> llt(innov_cov);
  if (llt.info() != Eigen::Success) {
    innov_cov += Mat4::Identity() * 1e-9;  // re-conditioning jitter
    llt.compute(innov_cov);
  }
  // K = P H^T S^-1, computed via the Cholesky solve of S K^T = H P.
  const Eigen::Matrix<double, 8, 4> gain = llt.solve(hmat * cov).transpose();

  Vec8 new_mean = mean + gain * innovation;
  // Joseph form keeps the posterior symmetric PSD even with rounding.
  const Mat8 ikh = Mat8::Identity() - gain * hmat;
  const Mat8 new_cov = ikh * cov * ikh.transpose() + gain * r * gain.transpose();

  new_mean(2) = std::max(new_mean(2), 1e-3);
  new_mean(3) = std::max(new_mean(3), 1e-3);

  KalmanState out = s;
  from_eigen(new_mean, new_cov, out);
  return out;
}

}  // namespace transmot
