#pragma once

#include <Eigen/Dense>

// Spectral helpers for 2*pi-periodic closed curves sampled at n = 2^k
// equispaced nodes alpha_j = 2*pi*j/n. All transforms go through FFTW with
// cached plans; results are deterministic for a fixed n.

namespace vesflow {

using Eigen::ArrayXd;
using Eigen::Matrix2Xd;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

bool is_pow2(int n);

// Throws std::invalid_argument unless n is a power of two and n >= 4.
void require_pow2(int n, const char* what);

// Equispaced parameter grid alpha_j = 2*pi*j/n.
VectorXd param_grid(int n);

// Differentiates the trigonometric interpolant `order` times. Odd orders
// drop the Nyquist mode (its derivative has no consistent real sample);
// even orders keep it.
VectorXd fourier_derivative(const VectorXd& f, int order);

// Dense matrix representation of fourier_derivative (cached per (n, order)).
const MatrixXd& fourier_diff_matrix(int n, int order);

// Trigonometric resampling onto n_new equispaced nodes. Upsampling
// zero-pads the spectrum and splits the Nyquist coefficient between +/-
// n/2 so the interpolant stays real; downsampling truncates.
VectorXd resample(const VectorXd& f, int n_new);
Matrix2Xd resample(const Matrix2Xd& f, int n_new);

// Grid size used for smooth-rule evaluation near (but outside) the near
// zone of a curve with n nodes: next power of two >= n^(3/2).
int upsample_size(int n);

// Evaluates sum_{m=0}^{n/2} coeffs[m] cos(m alpha_j) at all grid nodes with
// one inverse FFT; coeffs has size n/2 + 1.
VectorXd cosine_series_at_nodes(const VectorXd& coeffs);

// Trigonometric interpolant of one periodic scalar series; evaluates the
// interpolant and its derivatives at arbitrary alpha in O(n) per call.
class TrigInterp {
 public:
  TrigInterp() = default;
  explicit TrigInterp(const VectorXd& samples);
  double operator()(double alpha, int deriv = 0) const;
  int size() const { return n_; }

 private:
  int n_ = 0;
  VectorXd re_, im_;  // spectrum for modes k = 0 .. n/2, scaled by 1/n
};

}  // namespace vesflow
