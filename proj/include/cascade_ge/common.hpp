#pragma once

// Shared numerics, error types, and small utilities used across the library.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cascade_ge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

// CES exponents closer to zero than this are evaluated in the Cobb-Douglas
// log-linear limit.
inline constexpr double kGammaEps = 1e-8;

// Cost shares observed as zero in exactly one period are floored at this
// value so the share-ratio logs stay finite.
inline constexpr double kShareFloor = 1e-9;

// ---------------------------------------------------------------------------
// Errors

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (bad CSV, negative outputs, ...).
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A nest whose observed shares cannot be rationalized by any CES pair
// (relative price unchanged while the share ratio moved).
struct DegenerateNestError : Error {
  DegenerateNestError(int sector, int nest, const std::string& msg)
      : Error(msg), sector(sector), nest(nest) {}
  int sector;
  int nest;
};

// A linear system required by a closed form is singular or violates the
// positivity (Neumann-series) condition.
struct SingularSystemError : Error {
  explicit SingularSystemError(const std::string& msg) : Error(msg) {}
};

// An iterative solver exhausted its budget where convergence is mandatory.
struct NonConvergenceError : Error {
  explicit NonConvergenceError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Warnings
//
// Data-quality events (floored shares, dropped items) are reported through a
// process-wide sink so estimation results stay plain value types.  The
// default sink writes to stderr; tests may capture or silence it.

using WarnSink = std::function<void(const std::string&)>;

inline WarnSink& warn_sink() {
  static WarnSink sink = [](const std::string& msg) {
    std::fprintf(stderr, "[cascade-ge] warning: %s\n", msg.c_str());
  };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warn_sink()) warn_sink()(msg);
}

// ---------------------------------------------------------------------------
// Small numeric helpers

// Logarithmic mean L(a,b) = (a-b)/(ln a - ln b), continuously extended with
// L(a,a) = a.  Requires a, b > 0.  Evaluated via log1p to stay accurate when
// a and b are close.
inline double log_mean(double a, double b) {
  if (a == b) return a;
  const double d = (a - b) / b;
  return b * d / std::log1p(d);
}

// 64-bit FNV-1a; used to fingerprint run configurations in output headers.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Shortest decimal string that round-trips a double (17 significant digits).
inline std::string to_string17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Parallel map
//
// Worker count: min(hardware, CASCADE_GE_THREADS when set, n).  Bodies must
// be independent across indices; results are written by index so output
// order never depends on the thread count.

inline int max_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("CASCADE_GE_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) hw = std::min<long>(hw, cap);
  }
  return hw;
}

template <class Fn>
void parallel_for(int n, Fn&& body) {
  const int workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Quasi-Newton minimizer (BFGS with numeric central-difference gradients and
// Armijo backtracking).  Small and self-contained; used by the multi-point
// share-equation fit.

struct MinimizeOptions {
  int max_iter = 500;
  double grad_tol = 1e-10;  // sup-norm of the gradient
};

struct MinimizeResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <class Fn>
Vec numeric_gradient(Fn&& f, const Vec& x, double f0) {
  (void)f0;
  const int n = static_cast<int>(x.size());
  Vec g(n);
  Vec xp = x;
  for (int k = 0; k < n; ++k) {
    const double h = 1e-7 * (1.0 + std::abs(x[k]));
    const double saved = xp[k];
    xp[k] = saved + h;
    const double fp = f(xp);
    xp[k] = saved - h;
    const double fm = f(xp);
    xp[k] = saved;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

template <class Fn>
MinimizeResult minimize_bfgs(Fn&& f, Vec x0, const MinimizeOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  MinimizeResult out;
  out.x = std::move(x0);
  out.value = f(out.x);
  Mat H = Mat::Identity(n, n);
  Vec g = detail::numeric_gradient(f, out.x, out.value);
  for (int it = 0; it < opt.max_iter; ++it) {
    out.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      out.converged = true;
      return out;
    }
    Vec d = -(H * g);
    if (d.dot(g) >= 0.0) {  // not a descent direction: reset curvature
      H.setIdentity();
      d = -g;
    }
    // Armijo backtracking.
    double step = 1.0;
    const double slope = g.dot(d);
    double fx_new = out.value;
    Vec x_new = out.x;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = out.x + step * d;
      fx_new = f(x_new);
      if (fx_new <= out.value + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      out.converged = g.lpNorm<Eigen::Infinity>() < 1e3 * opt.grad_tol;
      return out;  // line search collapsed; best iterate so far
    }
    Vec g_new = detail::numeric_gradient(f, x_new, fx_new);
    const Vec s = x_new - out.x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Mat I = Mat::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    out.x = std::move(x_new);
    out.value = fx_new;
    g = std::move(g_new);
  }
  out.iterations = opt.max_iter;
  return out;
}

}  // namespace cascade_ge
