#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qfield/error.hpp"

namespace qfield {

namespace detail {
template <typename R>
R magnitude(R x) {
  return std::abs(x);
}
template <typename R>
R magnitude(const std::complex<R>& z) {
  return std::abs(z.real()) + std::abs(z.imag());
}
template <typename R>
bool finite(R x) {
  return std::isfinite(x);
}
template <typename R>
bool finite(const std::complex<R>& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}
}  // namespace detail

/// LU factorization of a general tridiagonal matrix with partial pivoting
/// (the gttrf/gtts2 scheme). lower/upper have n-1 entries.
template <typename T>
class TridiagonalLu {
 public:
  TridiagonalLu() = default;

  TridiagonalLu(std::vector<T> lower, std::vector<T> diag, std::vector<T> upper)
      : dl_(std::move(lower)), d_(std::move(diag)), du_(std::move(upper)) {
    const std::size_t n = d_.size();
    if (n == 0 || dl_.size() + 1 != n || du_.size() + 1 != n)
      throw Error(ErrorCode::size_mismatch, "tridiagonal bands have inconsistent lengths");
    du2_.assign(n > 2 ? n - 2 : 0, T{});
    swap_.assign(n, false);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (detail::magnitude(d_[i]) >= detail::magnitude(dl_[i])) {
        if (d_[i] == T{}) fail(i);
        const T f = dl_[i] / d_[i];
        dl_[i] = f;
        d_[i + 1] -= f * du_[i];
      } else {
        const T f = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = f;
        const T tmp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = tmp - f * d_[i + 1];
        if (i + 2 < n) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -f * du_[i + 1];
        }
        swap_[i] = true;
      }
      if (!detail::finite(d_[i]) || !detail::finite(d_[i + 1])) fail(i);
    }
    if (d_[n - 1] == T{}) fail(n - 1);
  }

  std::size_t size() const { return d_.size(); }

  /// Solves A x = b in place.
  void solve(std::span<T> b) const {
    const std::size_t n = d_.size();
    if (b.size() != n) throw Error(ErrorCode::size_mismatch, "tridiagonal right-hand side has wrong length");
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (swap_[i]) {
        const T tmp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = tmp - dl_[i] * b[i];
      } else {
        b[i + 1] -= dl_[i] * b[i];
      }
    }
    b[n - 1] /= d_[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
    for (std::size_t ii = n > 2 ? n - 2 : 0; ii-- > 0;)
      b[ii] = (b[ii] - du_[ii] * b[ii + 1] - du2_[ii] * b[ii + 2]) / d_[ii];
    for (std::size_t i = 0; i < n; ++i)
      if (!detail::finite(b[i])) throw Error(ErrorCode::solver_breakdown, "tridiagonal solve produced non-finite values");
  }

 private:
  [[noreturn]] static void fail(std::size_t row) {
    throw Error(ErrorCode::solver_breakdown, "tridiagonal factorization broke down at row " + std::to_string(row));
  }

  std::vector<T> dl_, d_, du_, du2_;
  std::vector<bool> swap_;
};

struct TridiagonalEigen {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;  // unit Euclidean norm
};

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) below x.
inline std::size_t sturm_count(std::span<const double> diag, std::span<const double> off, double x) {
  constexpr double tiny = std::numeric_limits<double>::min();
  std::size_t count = 0;
  double q = diag[0] - x;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < diag.size(); ++i) {
    if (q == 0.0) q = tiny;
    q = diag[i] - x - off[i - 1] * off[i - 1] / q;
    if (q < 0.0) ++count;
  }
  return count;
}

/// Lowest `count` eigenpairs of a real symmetric tridiagonal matrix by
/// bisection on the Sturm sequence followed by inverse iteration.
inline TridiagonalEigen lowest_eigenpairs(std::span<const double> diag, std::span<const double> off, std::size_t count) {
  const std::size_t n = diag.size();
  if (off.size() + 1 != n) throw Error(ErrorCode::size_mismatch, "off-diagonal must have n-1 entries");
  if (count == 0 || count > n) throw Error(ErrorCode::invalid_argument, "requested eigenpair count out of range");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const double scale = std::max(std::abs(lo), std::abs(hi));
  lo -= 1e-12 * scale + 1e-300;
  hi += 1e-12 * scale + 1e-300;

  constexpr int kMaxBisection = 400;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  TridiagonalEigen out;
  for (std::size_t k = 0; k < count; ++k) {
    double a = k == 0 ? lo : out.values.back(), b = hi;
    int it = 0;
    while (b - a > 2.0 * eps * std::max(std::abs(a), std::abs(b)) + 4.0 * eps * scale * 1e-3) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (sturm_count(diag, off, mid) > k)
        b = mid;
      else
        a = mid;
      if (++it > kMaxBisection)
        throw Error(ErrorCode::convergence_failure, "bisection for eigenvalue " + std::to_string(k) +
                                                        " did not converge after " + std::to_string(it) +
                                                        " iterations, bracket [" + std::to_string(a) + ", " +
                                                        std::to_string(b) + "]");
    }
    out.values.push_back(0.5 * (a + b));
  }

  for (std::size_t k = 0; k < count; ++k) {
    const double lambda = out.values[k];
    // perturb the shift slightly so the factorization stays nonsingular
    const double shift = lambda + 8.0 * eps * scale;
    std::vector<double> dd(n), lower(off.begin(), off.end()), upper(off.begin(), off.end());
    for (std::size_t i = 0; i < n; ++i) dd[i] = diag[i] - shift;
    const TridiagonalLu<double> lu(std::move(lower), std::move(dd), std::move(upper));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.01 * std::sin(0.7 * static_cast<double>(i) + 0.3);
    for (int pass = 0; pass < 4; ++pass) {
      lu.solve(x);
      for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += x[i] * out.vectors[j][i];
        for (std::size_t i = 0; i < n; ++i) x[i] -= dot * out.vectors[j][i];
      }
      double nrm = 0.0;
      for (double v : x) nrm += v * v;
      nrm = std::sqrt(nrm);
      if (!(nrm > 0.0) || !std::isfinite(nrm))
        throw Error(ErrorCode::convergence_failure, "inverse iteration collapsed for eigenvalue " + std::to_string(k));
      for (double& v : x) v /= nrm;
    }
    out.vectors.push_back(std::move(x));
  }
  return out;
}

}  // namespace qfield
