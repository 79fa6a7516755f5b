#include "tnnsim/pcsa.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tnnsim/csv.hpp"
#include "tnnsim/errors.hpp"

namespace tnnsim::pcsa {

void PcsaParams::validate() const {
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!finite_pos(vdd)) throw ConfigError("pcsa: vdd must be > 0");
  if (!finite_pos(branch_capacitance)) throw ConfigError("pcsa: branch_capacitance must be > 0");
  if (!(trip_fraction > 0.0 && trip_fraction < 1.0))
    throw ConfigError("pcsa: trip_fraction must lie in (0, 1)");
  if (!(min_differential > 0.0 && min_differential < 1.0))
    throw ConfigError("pcsa: min_differential must lie in (0, 1)");
  if (!(latch_delay >= 0.0) || !std::isfinite(latch_delay))
    throw ConfigError("pcsa: latch_delay must be >= 0");
  if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma))
    throw ConfigError("pcsa: jitter_sigma must be >= 0");
}

namespace {

void check_resistance(double r, const char* name) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw DomainError(std::string("pcsa: resistance ") + name + " must be finite and > 0");
  }
}

// Branch separation in units of Vdd at normalized time u = t / (R_fast * C);
// rho = R_fast / R_slow < 1.
double separation(double u, double rho) { return std::exp(-rho * u) - std::exp(-u); }

}  // namespace

double resolution_time(double r_bl, double r_blb, const PcsaParams& params) {
  check_resistance(r_bl, "r_bl");
  check_resistance(r_blb, "r_blb");
  params.validate();
  if (r_bl == r_blb) return kNonResolving;

  const double r_fast = std::min(r_bl, r_blb);
  const double r_slow = std::max(r_bl, r_blb);
  const double rho = r_fast / r_slow;
  const double tau = r_fast * params.branch_capacitance;
  const double dv = params.min_differential;

  const double u_peak = -std::log(rho) / (1.0 - rho);
  if (separation(u_peak, rho) < dv) return kNonResolving;

  const double u_trip = -std::log(params.trip_fraction);
  if (u_trip > u_peak) {
    // separation is shrinking by the time the fast branch trips
    return separation(u_trip, rho) >= dv ? u_trip * tau : kNonResolving;
  }
  if (separation(u_trip, rho) >= dv) return u_trip * tau;

  // first crossing of dv on the rising edge, inside (u_trip, u_peak]
  double lo = u_trip;
  double hi = u_peak;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (separation(mid, rho) >= dv)
      hi = mid;
    else
      lo = mid;
  }
  return hi * tau;
}

double switching_time(double r_bl, double r_blb, const PcsaParams& params) {
  const double t = resolution_time(r_bl, r_blb, params);
  return std::isinf(t) ? t : t + params.latch_delay;
}

SenseOutcome sense(double r_bl, double r_blb, const PcsaParams& params, double window,
                   Rng& rng) {
  if (!(window > 0.0)) throw DomainError("pcsa: sense window must be > 0");
  const double t = switching_time(r_bl, r_blb, params) * lognormal_factor(params.jitter_sigma, rng);
  if (!(t <= window)) return SenseOutcome::unresolved();
  return {true, r_bl < r_blb ? Branch::BL : Branch::BLb, t};
}

// --- calibration ---------------------------------------------------------

double CalibrationResult::max_abs_rel_error() const {
  double m = 0.0;
  for (const auto& f : fits) m = std::max(m, std::abs(f.rel_error));
  return m;
}

namespace {

constexpr double kUnresolvedPenalty = 10.0;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class CalibrationProblem {
 public:
  CalibrationProblem(std::span<const Anchor> anchors, const FreeParams& free,
                     const PcsaParams& initial)
      : anchors_(anchors), free_(free), base_(initial) {}

  std::size_t dims() const { return free_.count(); }

  PcsaParams decode(const std::vector<double>& x) const {
    PcsaParams p = base_;
    std::size_t k = 0;
    if (free_.capacitance) p.branch_capacitance = std::exp(x[k++]);
    if (free_.trip_fraction) p.trip_fraction = sigmoid(x[k++]);
    if (free_.min_differential) p.min_differential = sigmoid(x[k++]);
    if (free_.latch_delay) p.latch_delay = std::exp(x[k++]);
    return p;
  }

  std::vector<double> encode(const PcsaParams& p) const {
    std::vector<double> x;
    if (free_.capacitance) x.push_back(std::log(p.branch_capacitance));
    if (free_.trip_fraction) x.push_back(logit(p.trip_fraction));
    if (free_.min_differential) x.push_back(logit(p.min_differential));
    if (free_.latch_delay) x.push_back(std::log(std::max(p.latch_delay, 1e-15)));
    return x;
  }

  double objective(const std::vector<double>& x) const {
    const PcsaParams p = decode(x);
    // sigmoid saturates to exactly 0/1 far out; treat as infeasible
    if (!(p.trip_fraction > 0.0 && p.trip_fraction < 1.0) ||
        !(p.min_differential > 0.0 && p.min_differential < 1.0) ||
        !(p.branch_capacitance > 0.0) || !std::isfinite(p.branch_capacitance) ||
        !std::isfinite(p.latch_delay)) {
      return 1e300;
    }
    double sum = 0.0;
    for (const Anchor& a : anchors_) {
      const double t = switching_time(a.r_bl, a.r_blb, p);
      const double e = std::isinf(t) ? kUnresolvedPenalty : (t - a.target_time) / a.target_time;
      sum += e * e;
    }
    return sum;
  }

 private:
  std::span<const Anchor> anchors_;
  FreeParams free_;
  PcsaParams base_;
};

struct Simplex {
  std::vector<std::vector<double>> points;
  std::vector<double> values;
};

// Plain Nelder-Mead with the standard coefficients. Deterministic.
std::vector<double> nelder_mead(const CalibrationProblem& problem, std::vector<double> start,
                                double step, int max_iter) {
  const std::size_t n = start.size();
  Simplex s;
  s.points.push_back(start);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = start;
    p[i] += step;
    s.points.push_back(p);
  }
  for (const auto& p : s.points) s.values.push_back(problem.objective(p));

  std::vector<std::size_t> order(n + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        size = std::max(size, std::abs(s.points[i][d] - s.points[best][d]));
    if (size < 1e-11 && s.values[worst] - s.values[best] <= 1e-18) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += s.points[i][d] / static_cast<double>(n);
    }
    auto along = [&](double coef) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d)
        p[d] = centroid[d] + coef * (s.points[worst][d] - centroid[d]);
      return p;
    };

    auto reflected = along(-1.0);
    const double f_r = problem.objective(reflected);
    if (f_r < s.values[best]) {
      auto expanded = along(-2.0);
      const double f_e = problem.objective(expanded);
      if (f_e < f_r) {
        s.points[worst] = std::move(expanded);
        s.values[worst] = f_e;
      } else {
        s.points[worst] = std::move(reflected);
        s.values[worst] = f_r;
      }
      continue;
    }
    if (f_r < s.values[second]) {
      s.points[worst] = std::move(reflected);
      s.values[worst] = f_r;
      continue;
    }
    const bool outside = f_r < s.values[worst];
    auto contracted = along(outside ? -0.5 : 0.5);
    const double f_c = problem.objective(contracted);
    if (f_c < (outside ? f_r : s.values[worst])) {
      s.points[worst] = std::move(contracted);
      s.values[worst] = f_c;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d)
        s.points[i][d] = s.points[best][d] + 0.5 * (s.points[i][d] - s.points[best][d]);
      s.values[i] = problem.objective(s.points[i]);
    }
  }
  const auto it = std::min_element(s.values.begin(), s.values.end());
  return s.points[static_cast<std::size_t>(it - s.values.begin())];
}

}  // namespace

CalibrationResult calibrate(std::span<const Anchor> anchors, const FreeParams& free,
                            const PcsaParams& initial) {
  const std::size_t min_anchors = free.count() == 4 ? 1 : 2;
  if (anchors.size() < min_anchors) {
    throw DomainError("pcsa calibrate: need at least " + std::to_string(min_anchors) +
                      " anchors");
  }
  const double vdd = anchors.front().vdd;
  for (const Anchor& a : anchors) {
    check_resistance(a.r_bl, "anchor r_bl");
    check_resistance(a.r_blb, "anchor r_blb");
    if (!(a.target_time > 0.0) || !std::isfinite(a.target_time))
      throw DomainError("pcsa calibrate: anchor target times must be > 0");
    if (a.vdd != vdd) throw DomainError("pcsa calibrate: anchors mix supply voltages");
  }
  PcsaParams base = initial;
  base.vdd = vdd;
  base.validate();

  const CalibrationProblem problem(anchors, free, base);
  std::vector<double> best_x = problem.encode(base);

  if (problem.dims() > 0) {
    // coarse multi-start grid over the free coordinates
    const std::vector<double> grid_c = {1e-14, 3e-14, 1e-13, 3e-13, 1e-12, 3e-12, 1e-11};
    const std::vector<double> grid_trip = {0.2, 0.5, 0.8, 0.9, 0.97};
    const std::vector<double> grid_dv = {0.002, 0.008, 0.015, 0.025, 0.035, 0.06};
    const std::vector<double> grid_latch = {1e-12, 5e-9, 2e-8, 4e-8};
    auto axis = [](bool is_free, const std::vector<double>& g, double fixed) {
      return is_free ? g : std::vector<double>{fixed};
    };
    const auto cs = axis(free.capacitance, grid_c, base.branch_capacitance);
    const auto ts = axis(free.trip_fraction, grid_trip, base.trip_fraction);
    const auto ds = axis(free.min_differential, grid_dv, base.min_differential);
    const auto ls = axis(free.latch_delay, grid_latch, base.latch_delay);

    std::vector<std::pair<double, std::vector<double>>> starts;
    starts.emplace_back(problem.objective(best_x), best_x);
    for (double c : cs)
      for (double t : ts)
        for (double d : ds)
          for (double l : ls) {
            PcsaParams p = base;
            p.branch_capacitance = c;
            p.trip_fraction = t;
            p.min_differential = d;
            p.latch_delay = l;
            auto x = problem.encode(p);
            starts.emplace_back(problem.objective(x), std::move(x));
          }
    std::stable_sort(starts.begin(), starts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    double best_f = std::numeric_limits<double>::infinity();
    const std::size_t n_refine = std::min<std::size_t>(6, starts.size());
    for (std::size_t s = 0; s < n_refine; ++s) {
      std::vector<double> x = starts[s].second;
      double f = problem.objective(x);
      for (int restart = 0; restart < 8; ++restart) {
        auto next = nelder_mead(problem, x, restart == 0 ? 0.5 : 0.05, 4000);
        const double f_next = problem.objective(next);
        const bool improved = f_next < f - 1e-15 * std::max(1.0, f);
        if (f_next <= f) {
          x = std::move(next);
          f = f_next;
        }
        if (!improved) break;
      }
      if (f < best_f) {
        best_f = f;
        best_x = x;
      }
    }
  }

  CalibrationResult result;
  result.params = problem.decode(best_x);
  result.objective = problem.objective(best_x);
  for (const Anchor& a : anchors) {
    const double t = switching_time(a.r_bl, a.r_blb, result.params);
    const double rel = std::isinf(t) ? kNonResolving : (t - a.target_time) / a.target_time;
    result.fits.push_back({a, t, rel});
  }
  if (result.max_abs_rel_error() > CalibrationResult::kHardTolerance) {
    throw CalibrationError("pcsa calibrate: no parameter set reproduces every anchor within 25 %",
                           residual_report(result));
  }
  return result;
}

void write_residual_report(std::ostream& out, const CalibrationResult& result) {
  out << "r_bl_ohm,r_blb_ohm,vdd_v,target_ns,fitted_ns,rel_error\n";
  for (const auto& f : result.fits) {
    out << csv::num(f.anchor.r_bl) << ',' << csv::num(f.anchor.r_blb) << ','
        << csv::num(f.anchor.vdd) << ',' << csv::num(f.anchor.target_time * 1e9) << ','
        << csv::num(f.fitted_time * 1e9) << ',' << csv::num(f.rel_error) << '\n';
  }
}

std::string residual_report(const CalibrationResult& result) {
  std::ostringstream os;
  write_residual_report(os, result);
  return os.str();
}

std::vector<Anchor> default_anchors(double vdd) {
  // 20k/350k and 320k/350k transients; 30k/100k converges within a 50 ns read
  // with margin for jitter; 100k/1M sits on the 70 ns HRS/HRS boundary.
  const std::array<Anchor, 4> near_threshold = {{
      {20e3, 350e3, 0.6, 50e-9},
      {320e3, 350e3, 0.6, 200e-9},
      {30e3, 100e3, 0.6, 40e-9},
      {100e3, 1e6, 0.6, 70e-9},
  }};
  std::vector<Anchor> out(near_threshold.begin(), near_threshold.end());
  if (vdd == 0.6) return out;
  if (vdd == 1.2) {
    for (Anchor& a : out) {
      a.vdd = 1.2;
      a.target_time /= 3.0;
    }
    return out;
  }
  throw ConfigError("pcsa: no built-in anchors for vdd = " + std::to_string(vdd) +
                    " V (supported: 0.6, 1.2)");
}

CalibrationResult calibrate_builtin(double vdd) {
  PcsaParams init;
  init.vdd = 0.6;
  CalibrationResult near = calibrate(default_anchors(0.6), FreeParams{}, init);
  near.params.jitter_sigma = kDefaultJitterSigma;
  if (vdd == 0.6) return near;
  if (vdd != 1.2)
    throw ConfigError("pcsa: no built-in parameter set for vdd = " + std::to_string(vdd) +
                      " V (supported: 0.6, 1.2)");
  init = near.params;
  init.vdd = 1.2;
  init.min_differential = near.params.min_differential / 3.0;
  init.latch_delay = near.params.latch_delay / 3.0;
  FreeParams free;
  free.min_differential = false;
  free.latch_delay = false;
  CalibrationResult nominal = calibrate(default_anchors(1.2), free, init);
  nominal.params.jitter_sigma = kDefaultJitterSigma;
  return nominal;
}

const PcsaParams& default_params(double vdd) {
  if (vdd == 0.6) {
    static const PcsaParams near_threshold = calibrate_builtin(0.6).params;
    return near_threshold;
  }
  if (vdd == 1.2) {
    static const PcsaParams nominal = calibrate_builtin(1.2).params;
    return nominal;
  }
  throw ConfigError("pcsa: no built-in parameter set for vdd = " + std::to_string(vdd) +
                    " V (supported: 0.6, 1.2)");
}

// --- maps ----------------------------------------------------------------

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw DomainError("log_grid: need 0 < lo <= hi, n > 0");
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::size_t SwitchingMap::count_slower_than(double threshold, double lo, double hi) const {
  std::size_t count = 0;
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    if (grid[i] < lo || grid[i] > hi) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (grid[j] < lo || grid[j] > hi) continue;
      if (at(i, j) > threshold) ++count;
    }
  }
  return count;
}

SwitchingMap switching_time_map(std::span<const double> r_grid, const PcsaParams& params) {
  SwitchingMap map;
  map.grid.assign(r_grid.begin(), r_grid.end());
  const std::size_t n = map.grid.size();
  map.times.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      map.times[i * n + j] = switching_time(map.grid[i], map.grid[j], params);
  return map;
}

void write_map_csv(std::ostream& out, const SwitchingMap& map) {
  out << "r_bl_ohm,r_blb_ohm,t_sw_ns\n";
  const std::size_t n = map.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out << csv::num(map.grid[i]) << ',' << csv::num(map.grid[j]) << ','
          << csv::num(map.at(i, j) * 1e9) << '\n';
}

}  // namespace tnnsim::pcsa
