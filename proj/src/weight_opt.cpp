#include "esci/weight_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace esci {

std::optional<CostKind> parse_cost(std::string_view name) {
  if (name == "trace") return CostKind::Trace;
  if (name == "logdet") return CostKind::LogDet;
  if (name == "maxeig") return CostKind::MaxEig;
  return std::nullopt;
}

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::Trace: return "trace";
    case CostKind::LogDet: return "logdet";
    case CostKind::MaxEig: return "maxeig";
  }
  return "?";
}

double evaluate_cost(const SymMatrix& bound, CostKind kind) {
  switch (kind) {
    case CostKind::Trace: return bound.trace();
    case CostKind::LogDet: return log_det_spd(bound);
    case CostKind::MaxEig: return bound.max_eigenvalue();
  }
  fail(ErrorKind::InvalidArgument, "unknown cost kind");
}

namespace {

constexpr double kInvPhi = 0.6180339887498948482;

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

// Keeps the best point seen so far; every probe goes through here.
class Incumbent {
 public:
  void offer(double cost, const Vec& omega) {
    ++evaluations;
    if (!std::isfinite(cost)) return;
    if (!has_ || cost < cost_ || (cost == cost_ && lex_less(omega, omega_))) {
      has_ = true;
      cost_ = cost;
      omega_ = omega;
    }
  }
  bool has() const { return has_; }
  double cost() const { return cost_; }
  const Vec& omega() const { return omega_; }
  int evaluations = 0;

 private:
  bool has_ = false;
  double cost_ = std::numeric_limits<double>::infinity();
  Vec omega_;
};

// Golden-section minimization of f on [lo, hi] down to width tol. Returns the argmin of
// the probed points (including the two interior probes of the final bracket).
template <class F>
std::pair<double, double> golden_section(F&& f, double lo, double hi, double tol) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace

WeightSolution optimize_pair(const PairEvaluator& fuse, CostKind cost, PairOptions opts) {
  if (opts.grid_points < 3) fail(ErrorKind::InvalidArgument, "optimize_pair needs at least 3 grid points");
  if (!(opts.tol > 0.0)) fail(ErrorKind::InvalidArgument, "optimize_pair tolerance must be positive");
  Incumbent best;
  auto f = [&](double w) {
    w = std::clamp(w, 0.0, 1.0);
    const double c = evaluate_cost(fuse(w), cost);
    best.offer(c, Simplex::pair(w).values());
    return c;
  };

  const int g = opts.grid_points;
  int k_best = 0;
  double c_best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g; ++k) {
    const double c = f(static_cast<double>(k) / (g - 1));
    if (c < c_best) {
      c_best = c;
      k_best = k;
    }
  }
  const double lo = static_cast<double>(std::max(0, k_best - 1)) / (g - 1);
  const double hi = static_cast<double>(std::min(g - 1, k_best + 1)) / (g - 1);
  golden_section(f, lo, hi, opts.tol);
  if (!best.has()) fail(ErrorKind::SingularMatrix, "no finite cost found on [0, 1]");
  return WeightSolution{Simplex(best.omega()), best.cost(), best.evaluations};
}

Simplex stick_breaking(const Vec& t) {
  const int n = static_cast<int>(t.size()) + 1;
  Vec w(n);
  double rest = 1.0;
  for (int i = 0; i < n - 1; ++i) {
    const double ti = std::clamp(t(i), 0.0, 1.0);
    w(i) = rest * ti;
    rest *= 1.0 - ti;
  }
  w(n - 1) = rest;
  return Simplex(std::move(w));
}

WeightSolution optimize_simplex(const SimplexEvaluator& fuse, CostKind cost, int n, SimplexOptions opts) {
  if (n < 2) fail(ErrorKind::InvalidArgument, "optimize_simplex needs N >= 2");
  Incumbent best;
  auto f = [&](const Vec& t) {
    const Simplex w = stick_breaking(t);
    const double c = evaluate_cost(fuse(w), cost);
    best.offer(c, w.values());
    return c;
  };

  // Starts: vertices, centroid, then seeded random points, in stick-breaking coordinates.
  std::vector<Vec> starts;
  for (int i = 0; i < n; ++i) {
    Vec t = Vec::Constant(n - 1, 0.5);
    for (int j = 0; j < i && j < n - 1; ++j) t(j) = 0.0;
    if (i < n - 1) t(i) = 1.0;
    starts.push_back(t);
  }
  {
    Vec t(n - 1);
    for (int j = 0; j < n - 1; ++j) t(j) = 1.0 / (n - j);
    starts.push_back(t);
  }
  std::mt19937_64 rng(opts.seed ^ static_cast<unsigned long long>(n));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int total = std::max(opts.starts, n + 1);
  while (static_cast<int>(starts.size()) < total) {
    // Uniform on the simplex: normalized exponentials, mapped back to sticks.
    Vec e(n);
    for (int i = 0; i < n; ++i) e(i) = -std::log(1.0 - uni(rng));
    e /= e.sum();
    Vec t(n - 1);
    double rest = 1.0;
    for (int j = 0; j < n - 1; ++j) {
      t(j) = rest > 0.0 ? std::clamp(e(j) / rest, 0.0, 1.0) : 0.5;
      rest -= e(j);
    }
    starts.push_back(t);
  }

  constexpr int kScan = 9;
  for (const Vec& start : starts) {
    Vec t = start;
    double current = f(t);
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
      const double before = current;
      for (int j = 0; j < n - 1; ++j) {
        auto line = [&](double s) {
          Vec tt = t;
          tt(j) = s;
          return f(tt);
        };
        // Coarse scan guards against a non-unimodal restriction.
        double s_best = t(j);
        double c_best = current;
        for (int k = 0; k < kScan; ++k) {
          const double s = static_cast<double>(k) / (kScan - 1);
          const double c = line(s);
          if (c < c_best) {
            c_best = c;
            s_best = s;
          }
        }
        const double width = 1.0 / (kScan - 1);
        const auto [s_ref, c_ref] =
            golden_section(line, std::max(0.0, s_best - width), std::min(1.0, s_best + width), opts.line_tol);
        if (c_ref < c_best) {
          c_best = c_ref;
          s_best = s_ref;
        }
        if (c_best < current) {
          t(j) = s_best;
          current = c_best;
        }
      }
      if (before - current <= opts.rel_tol * std::abs(before)) break;
    }
  }
  if (!best.has()) fail(ErrorKind::SingularMatrix, "no finite cost found on the simplex");
  return WeightSolution{Simplex(best.omega()), best.cost(), best.evaluations};
}

}  // namespace esci
