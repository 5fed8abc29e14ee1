#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "qfield/error.hpp"

namespace qfield {

namespace detail {
// FFTW's planner is not re-entrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename Real>
struct FftwApi;

template <>
struct FftwApi<double> {
  using cpx = fftw_complex;
  using plan = fftw_plan;
  static cpx* alloc(std::size_t n) { return fftw_alloc_complex(n); }
  static void free(cpx* p) { fftw_free(p); }
  static plan make(int n, cpx* b, int sign) { return fftw_plan_dft_1d(n, b, b, sign, FFTW_ESTIMATE); }
  static void execute(plan p) { fftw_execute(p); }
  static void destroy(plan p) { fftw_destroy_plan(p); }
};

template <>
struct FftwApi<long double> {
  using cpx = fftwl_complex;
  using plan = fftwl_plan;
  static cpx* alloc(std::size_t n) { return fftwl_alloc_complex(n); }
  static void free(cpx* p) { fftwl_free(p); }
  static plan make(int n, cpx* b, int sign) { return fftwl_plan_dft_1d(n, b, b, sign, FFTW_ESTIMATE); }
  static void execute(plan p) { fftwl_execute(p); }
  static void destroy(plan p) { fftwl_destroy_plan(p); }
};
}  // namespace detail

/// Unnormalized complex DFT of fixed length backed by FFTW, computed in
/// precision Real. Owns its plans and scratch; one instance per concurrent
/// user. Data in and out is std::complex<double> or std::complex<Real>.
template <typename Real>
class BasicFft {
  using Api = detail::FftwApi<Real>;

 public:
  explicit BasicFft(std::size_t n) : n_(n) {
    if (n == 0) throw Error(ErrorCode::invalid_argument, "FFT length must be positive");
    std::lock_guard lock(detail::fftw_planner_mutex());
    buf_ = Api::alloc(n);
    fwd_ = Api::make(static_cast<int>(n), buf_, FFTW_FORWARD);
    bwd_ = Api::make(static_cast<int>(n), buf_, FFTW_BACKWARD);
  }
  BasicFft(const BasicFft&) = delete;
  BasicFft& operator=(const BasicFft&) = delete;
  BasicFft(BasicFft&& o) noexcept : n_(o.n_), buf_(o.buf_), fwd_(o.fwd_), bwd_(o.bwd_) {
    o.buf_ = nullptr;
    o.fwd_ = o.bwd_ = nullptr;
  }
  ~BasicFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (fwd_) Api::destroy(fwd_);
    if (bwd_) Api::destroy(bwd_);
    if (buf_) Api::free(buf_);
  }

  std::size_t size() const { return n_; }

  /// In place, X_k = sum_j x_j exp(-2 pi i jk/n).
  template <typename T>
  void forward(std::span<std::complex<T>> data) {
    run(fwd_, data);
  }
  /// In place, x_j = sum_k X_k exp(+2 pi i jk/n) (no 1/n).
  template <typename T>
  void backward(std::span<std::complex<T>> data) {
    run(bwd_, data);
  }
  void forward(std::vector<std::complex<double>>& v) { run(fwd_, std::span<std::complex<double>>(v)); }
  void backward(std::vector<std::complex<double>>& v) { run(bwd_, std::span<std::complex<double>>(v)); }

 private:
  template <typename T>
  void run(typename Api::plan plan, std::span<std::complex<T>> data) {
    if (data.size() != n_) throw Error(ErrorCode::size_mismatch, "FFT length mismatch");
    auto* b = reinterpret_cast<std::complex<Real>*>(buf_);
    std::transform(data.begin(), data.end(), b, [](const std::complex<T>& z) { return std::complex<Real>(z); });
    Api::execute(plan);
    std::transform(b, b + n_, data.begin(), [](const std::complex<Real>& z) { return std::complex<T>(z); });
  }

  std::size_t n_;
  typename Api::cpx* buf_ = nullptr;
  typename Api::plan fwd_ = nullptr;
  typename Api::plan bwd_ = nullptr;
};

using Fft = BasicFft<double>;

/// Angular wave numbers matching the FFT ordering for spacing dx.
inline std::vector<double> fft_wavenumbers(std::size_t n, double dx) {
  std::vector<double> k(n);
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * dx);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<long long>(j);
    const auto nn = static_cast<long long>(n);
    k[j] = base * static_cast<double>(2 * jj < nn ? jj : jj - nn);
  }
  return k;
}

}  // namespace qfield
