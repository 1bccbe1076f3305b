#include "vesflow/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace vesflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// FFTW plans are cached per size; plan creation is serialized (FFTW's
// planner is not thread safe) and uses FFTW_ESTIMATE so the twiddle
// choices, and therefore the results, never depend on timing.
struct FftPlans {
  fftw_plan fwd = nullptr;  // r2c
  fftw_plan bwd = nullptr;  // c2r
};

std::mutex g_plan_mutex;
std::map<int, FftPlans>& plan_cache() {
  static std::map<int, FftPlans> cache;
  return cache;
}

const FftPlans& plans_for(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  FftPlans p;
  std::vector<double> re(n);
  std::vector<fftw_complex> sp(n / 2 + 1);
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.fwd = fftw_plan_dft_r2c_1d(n, re.data(), sp.data(), flags);
  p.bwd = fftw_plan_dft_c2r_1d(n, sp.data(), re.data(), flags);
  return cache.emplace(n, p).first->second;
}

void fft_r2c(const VectorXd& f, std::vector<std::complex<double>>& spec) {
  const int n = static_cast<int>(f.size());
  spec.resize(n / 2 + 1);
  const FftPlans& p = plans_for(n);
  fftw_execute_dft_r2c(p.fwd, const_cast<double*>(f.data()),
                       reinterpret_cast<fftw_complex*>(spec.data()));
}

VectorXd fft_c2r(std::vector<std::complex<double>>& spec, int n) {
  VectorXd out(n);
  const FftPlans& p = plans_for(n);
  fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(spec.data()),
                       out.data());
  return out / n;  // FFTW leaves the inverse unscaled
}

}  // namespace

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

void require_pow2(int n, const char* what) {
  if (n < 4 || !is_pow2(n))
    throw std::invalid_argument(std::string(what) +
                                " must be a power of two >= 4, got " +
                                std::to_string(n));
}

VectorXd param_grid(int n) {
  require_pow2(n, "grid size");
  VectorXd a(n);
  for (int j = 0; j < n; ++j) a[j] = kTwoPi * j / n;
  return a;
}

VectorXd fourier_derivative(const VectorXd& f, int order) {
  const int n = static_cast<int>(f.size());
  require_pow2(n, "sample count");
  if (order < 0) throw std::invalid_argument("derivative order must be >= 0");
  if (order == 0) return f;
  std::vector<std::complex<double>> spec;
  fft_r2c(f, spec);
  for (int k = 0; k <= n / 2; ++k) {
    double kp = std::pow(static_cast<double>(k), order);
    switch (order % 4) {  // multiply by (i k)^order with an exact i^order
      case 0: spec[k] *= kp; break;
      case 1: spec[k] *= std::complex<double>(0.0, kp); break;
      case 2: spec[k] *= -kp; break;
      default: spec[k] *= std::complex<double>(0.0, -kp); break;
    }
  }
  if (order % 2 == 1) spec[n / 2] = 0.0;  // Nyquist has no odd derivative
  return fft_c2r(spec, n);
}

const MatrixXd& fourier_diff_matrix(int n, int order) {
  require_pow2(n, "matrix size");
  static std::mutex mtx;
  static std::map<std::pair<int, int>, MatrixXd> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(n, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  MatrixXd d(n, n);
  VectorXd e = VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    d.col(j) = fourier_derivative(e, order);
    e[j] = 0.0;
  }
  return cache.emplace(key, std::move(d)).first->second;
}

VectorXd resample(const VectorXd& f, int n_new) {
  const int n = static_cast<int>(f.size());
  require_pow2(n, "sample count");
  require_pow2(n_new, "resample size");
  if (n_new == n) return f;
  std::vector<std::complex<double>> spec;
  fft_r2c(f, spec);
  std::vector<std::complex<double>> out(n_new / 2 + 1, 0.0);
  if (n_new > n) {
    for (int k = 0; k < n / 2; ++k) out[k] = spec[k];
    // split the old Nyquist between modes +/- n/2; with a real spectrum tail
    // the r2c layout only stores +n/2, at half amplitude
    out[n / 2] = 0.5 * spec[n / 2];
  } else {
    for (int k = 0; k < n_new / 2; ++k) out[k] = spec[k];
    out[n_new / 2] = std::complex<double>(spec[n_new / 2].real(), 0.0);
  }
  return fft_c2r(out, n_new) * (static_cast<double>(n_new) / n);
}

Matrix2Xd resample(const Matrix2Xd& f, int n_new) {
  Matrix2Xd out(2, n_new);
  out.row(0) = resample(VectorXd(f.row(0)), n_new).transpose();
  out.row(1) = resample(VectorXd(f.row(1)), n_new).transpose();
  return out;
}

int upsample_size(int n) {
  require_pow2(n, "sample count");
  double target = std::pow(static_cast<double>(n), 1.5);
  int m = n;
  while (static_cast<double>(m) < target - 1e-9) m *= 2;
  return m;
}

VectorXd cosine_series_at_nodes(const VectorXd& coeffs) {
  const int n = 2 * (static_cast<int>(coeffs.size()) - 1);
  require_pow2(n, "cosine series length");
  std::vector<std::complex<double>> spec(n / 2 + 1, 0.0);
  spec[0] = coeffs[0];
  for (int m = 1; m < n / 2; ++m) spec[m] = 0.5 * coeffs[m];
  spec[n / 2] = coeffs[n / 2];
  return fft_c2r(spec, n) * n;
}

TrigInterp::TrigInterp(const VectorXd& samples) {
  n_ = static_cast<int>(samples.size());
  require_pow2(n_, "sample count");
  std::vector<std::complex<double>> spec;
  fft_r2c(samples, spec);
  const int h = n_ / 2;
  re_.resize(h + 1);
  im_.resize(h + 1);
  for (int k = 0; k <= h; ++k) {
    re_[k] = spec[k].real() / n_;
    im_[k] = spec[k].imag() / n_;
  }
}

double TrigInterp::operator()(double alpha, int deriv) const {
  // f(a) = c0 + sum_{k=1}^{h-1} 2*(re_k cos ka - im_k sin ka)
  //        + re_h cos(h a)   (Nyquist kept in pure cosine form)
  const int h = n_ / 2;
  double acc = deriv == 0 ? re_[0] : 0.0;
  for (int k = 1; k < h; ++k) {
    double c = std::cos(k * alpha), s = std::sin(k * alpha);
    double kp = std::pow(static_cast<double>(k), deriv);
    double ck, sk;  // derivative of (cos, -sin) pair, cycle of four
    switch (deriv % 4) {
      case 0: ck = c; sk = -s; break;
      case 1: ck = -s; sk = -c; break;
      case 2: ck = -c; sk = s; break;
      default: ck = s; sk = c; break;
    }
    acc += 2.0 * kp * (re_[k] * ck + im_[k] * sk);
  }
  double hp = std::pow(static_cast<double>(h), deriv);
  double nyq;
  switch (deriv % 4) {
    case 0: nyq = std::cos(h * alpha); break;
    case 1: nyq = -std::sin(h * alpha); break;
    case 2: nyq = -std::cos(h * alpha); break;
    default: nyq = std::sin(h * alpha); break;
  }
  acc += re_[h] * hp * nyq;
  return acc;
}

}  // namespace vesflow
