#pragma once

// Reference computations that share no code with the library paths they
// check: scalar loops instead of Eigen expressions, a quaternion solver
// instead of SVD, central differences instead of backprop.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include <blapose/blapose.hpp>

namespace oracle {

using namespace blapose;

inline double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// One GRU step evaluated entry by entry.
inline std::vector<double> gru_step(const LengthModelParams& p, int dir, const std::vector<double>& x,
                                    const std::vector<double>& h) {
  const auto g = p.gru(dir);
  const auto n = static_cast<int>(h.size()), m = static_cast<int>(x.size());
  std::vector<double> z(n), r(n), out(n);
  for (int i = 0; i < n; ++i) {
    double az = g.bz(i, 0), ar = g.br(i, 0);
    for (int k = 0; k < m; ++k) {
      az += g.Wz(i, k) * x[k];
      ar += g.Wr(i, k) * x[k];
    }
    for (int k = 0; k < n; ++k) {
      az += g.Uz(i, k) * h[k];
      ar += g.Ur(i, k) * h[k];
    }
    z[i] = sig(az);
    r[i] = sig(ar);
  }
  for (int i = 0; i < n; ++i) {
    double ah = g.bh(i, 0);
    for (int k = 0; k < m; ++k) ah += g.Wh(i, k) * x[k];
    for (int k = 0; k < n; ++k) ah += g.Uh(i, k) * r[k] * h[k];
    out[i] = (1.0 - z[i]) * h[i] + z[i] * std::tanh(ah);
  }
  return out;
}

inline std::vector<double> project(const LengthModelParams& p, const Eigen::MatrixXd& frames, long t) {
  const auto W = p.W_p();
  const auto b = p.b_p();
  std::vector<double> out(static_cast<std::size_t>(W.rows()));
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double s = b(i, 0);
    for (Eigen::Index k = 0; k < W.cols(); ++k) s += W(i, k) * frames(t, k);
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

// Whole-model prediction for one N x 2J sequence.
inline Eigen::VectorXd predict(const LengthModelParams& p, const Eigen::MatrixXd& frames) {
  const auto& d = p.dims();
  std::vector<double> head;
  for (int dir = 0; dir < d.directions(); ++dir) {
    std::vector<double> h(static_cast<std::size_t>(d.c_prime), 0.0);
    for (long k = 0; k < frames.rows(); ++k) {
      const long t = dir == 0 ? k : frames.rows() - 1 - k;
      h = gru_step(p, dir, project(p, frames, t), h);
    }
    head.insert(head.end(), h.begin(), h.end());
  }
  const auto W = p.W_R();
  Eigen::VectorXd out(W.rows());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double s = 0;
    for (Eigen::Index k = 0; k < W.cols(); ++k) s += W(i, k) * head[static_cast<std::size_t>(k)];
    out(i) = s;
  }
  return out;
}

inline double batch_loss(const LengthModelParams& p, const std::vector<LengthSample>& batch) {
  double s = 0;
  for (const auto& b : batch) {
    const Eigen::VectorXd y = predict(p, b.inputs);
    for (Eigen::Index i = 0; i < y.size(); ++i) s += std::abs(y(i) - b.target(i));
  }
  return s / static_cast<double>(batch.size() * static_cast<std::size_t>(p.dims().output_dim()));
}

// Worst |analytic - central difference| / max(1, |central difference|) over
// every parameter.
inline double gradient_check(const LengthModelParams& params, const std::vector<LengthSample>& batch,
                             double step = 1e-5) {
  const Eigen::VectorXd analytic = loss_and_gradient(params, make_batch(batch)).gradient.flat();
  double worst = 0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    LengthModelParams plus = params, minus = params;
    plus.flat()(i) += step;
    minus.flat()(i) -= step;
    const double fd = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2 * step);
    worst = std::max(worst, std::abs(analytic(i) - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

// Similarity alignment through Horn's unit-quaternion method: the rotation
// is the top eigenvector of a 4x4 symmetric matrix built from the
// cross-covariance, the scale is the ratio of projected to source spread.
inline Pose horn_align(const Pose& from, const Pose& to) {
  const Eigen::RowVector3d mf = from.colwise().mean(), mt = to.colwise().mean();
  const Pose a = from.rowwise() - mf, b = to.rowwise() - mt;
  double S[3][3] = {};
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) S[r][c] += a(i, r) * b(i, c);
  const double Sxx = S[0][0], Sxy = S[0][1], Sxz = S[0][2];
  const double Syx = S[1][0], Syy = S[1][1], Syz = S[1][2];
  const double Szx = S[2][0], Szy = S[2][1], Szz = S[2][2];
  Eigen::Matrix4d N;
  N << Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx,
      Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz,
      Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy,
      Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(N);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  const Eigen::Matrix3d R = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
  const Pose ra = a * R.transpose();
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    num += ra.row(i).dot(b.row(i));
    den += a.row(i).squaredNorm();
  }
  Pose out = (num / den) * ra;
  out.rowwise() += mt;
  return out;
}

inline double mean_distance_mm(const Pose& a, const Pose& b) {
  double s = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) s += (a.row(i) - b.row(i)).norm();
  return 1000.0 * s / static_cast<double>(a.rows());
}

}  // namespace oracle
