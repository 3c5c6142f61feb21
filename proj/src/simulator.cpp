#include "varcurve/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <omp.h>

#include "varcurve/errors.hpp"
#include "varcurve/philox.hpp"

namespace varcurve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t draw_index(std::span<const double> cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

std::vector<double> cumulate(std::span<const double> w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  if (!c.empty()) {
    const double total = c.back();
    for (double& x : c) x /= total;
  }
  return c;
}

class ServiceSampler {
 public:
  explicit ServiceSampler(const ServiceSpec& spec) {
    std::visit(overloaded{
                   [&](const Exponential& e) { kind_ = Kind::Exp, rate_ = e.rate; },
                   [&](const Deterministic& d) { kind_ = Kind::Fixed, value_ = d.value; },
                   [&](const Erlang& e) { kind_ = Kind::Erlang, rate_ = e.rate, shape_ = e.shape; },
                   [&](const HyperExponential& h) {
                     kind_ = Kind::Hyper;
                     cumulative_ = cumulate(h.weights);
                     values_ = h.rates;
                   },
                   [&](const LogNormal& l) {
                     kind_ = Kind::LogNormal;
                     rate_ = l.sigma();
                     value_ = l.location();
                   },
                   [&](const AtomMixturePlusExp& m) {
                     kind_ = Kind::Mixture;
                     rate_ = m.exp_rate;
                     value_ = m.exp_weight;
                     std::vector<double> w;
                     for (const Atom& a : m.atoms) {
                       w.push_back(a.weight);
                       values_.push_back(a.location);
                     }
                     cumulative_ = cumulate(w);
                   },
                   [&](const RawMoments&) {
                     throw Error(ErrorCode::UnsamplableSpec,
                                 "raw moments do not determine a distribution to sample");
                   }},
               spec);
  }

  double operator()(RandomStream& rng) const {
    switch (kind_) {
      case Kind::Exp: return rng.exponential(rate_);
      case Kind::Fixed: return value_;
      case Kind::Erlang: {
        double sum = 0.0;
        for (int i = 0; i < shape_; ++i) sum += rng.exponential(rate_);
        return sum;
      }
      case Kind::Hyper: return rng.exponential(values_[draw_index(cumulative_, rng.uniform())]);
      case Kind::LogNormal: return std::exp(value_ + rate_ * rng.normal());
      case Kind::Mixture: {
        const double u = rng.uniform();
        if (u < value_ || cumulative_.empty()) return rng.exponential(rate_);
        return values_[draw_index(cumulative_, (u - value_) / (1.0 - value_))];
      }
    }
    return 0.0;
  }

 private:
  enum class Kind { Exp, Fixed, Erlang, Hyper, LogNormal, Mixture } kind_ = Kind::Exp;
  double rate_ = 1.0;
  double value_ = 0.0;
  int shape_ = 1;
  std::vector<double> cumulative_;
  std::vector<double> values_;
};

// Everything derived from the config once, shared read-only by all workers.
struct Prepared {
  const SimConfig* cfg = nullptr;
  bool warmup = false;
  double warmup_duration = 0.0;
  int fixed_level = 0;
  std::vector<double> level_cumulative;  // empty: use fixed_level
  std::vector<ServiceSampler> service;   // one entry for M/G/1
};

Prepared prepare(const SimConfig& cfg) {
  validate(cfg);
  Prepared pr;
  pr.cfg = &cfg;
  std::visit(overloaded{
                 [](const EmptyStart&) {},
                 [&](const FixedStart& f) { pr.fixed_level = f.level; },
                 [&](const PmfStart& p) { pr.level_cumulative = cumulate(p.pmf); },
                 [&](const WarmupStart& w) {
                   pr.warmup = true;
                   pr.warmup_duration = w.duration;
                 },
                 [&](const EventStationaryStart&) {
                   const auto& m = std::get<Mm1kParams>(cfg.model);
                   const Vector pi = stationary_vector(m);
                   // A departure from level j + 1 leaves j behind.
                   std::vector<double> alpha(pi.begin() + 1, pi.end());
                   pr.level_cumulative = cumulate(alpha);
                 }},
             cfg.initial);
  if (const auto* g = std::get_if<Mg1Params>(&cfg.model)) pr.service.emplace_back(g->service);
  return pr;
}

std::uint32_t initial_level(const Prepared& pr, RandomStream& rng) {
  if (pr.level_cumulative.empty()) return static_cast<std::uint32_t>(pr.fixed_level);
  return static_cast<std::uint32_t>(draw_index(pr.level_cumulative, rng.uniform()));
}

void run_mm1k(const Prepared& pr, const Mm1kParams& p, std::uint32_t r,
              std::span<std::uint32_t> out, ReplicationTrace* trace) {
  const SimConfig& cfg = *pr.cfg;
  const auto& grid = cfg.grid;
  RandomStream arrivals(cfg.master_seed, r, StreamPurpose::Arrivals);
  RandomStream services(cfg.master_seed, r, StreamPurpose::Services);
  RandomStream initial(cfg.master_seed, r, StreamPurpose::Initial);
  const auto capacity = static_cast<std::uint32_t>(p.capacity);

  double t = pr.warmup ? -pr.warmup_duration : 0.0;
  std::uint32_t q = pr.warmup ? 0u : initial_level(pr, initial);
  double next_arrival = t + arrivals.exponential(p.arrival_rate);
  double next_departure = q > 0 ? t + services.exponential(p.service_rate) : kInf;
  std::uint32_t departed = 0, admitted = 0;
  bool counting = !pr.warmup;

  auto step = [&] {
    if (next_arrival <= next_departure) {
      t = next_arrival;
      if (q < capacity) {
        ++q;
        if (counting) ++admitted;
        if (q == 1) next_departure = t + services.exponential(p.service_rate);
      }
      next_arrival = t + arrivals.exponential(p.arrival_rate);
    } else {
      t = next_departure;
      --q;
      if (counting) ++departed;
      next_departure = q > 0 ? t + services.exponential(p.service_rate) : kInf;
    }
  };

  while (!counting && std::min(next_arrival, next_departure) <= 0.0) step();
  counting = true;
  if (trace) trace->initial_queue = q;

  std::size_t g = 0;
  while (g < grid.size()) {
    const double next = std::min(next_arrival, next_departure);
    for (; g < grid.size() && grid[g] < next; ++g) {
      out[g] = departed;
      if (trace) {
        trace->admitted[g] = admitted;
        trace->queue[g] = q;
      }
    }
    if (g < grid.size()) step();
  }
}

void run_mg1(const Prepared& pr, const Mg1Params& p, std::uint32_t r, std::span<std::uint32_t> out,
             ReplicationTrace* trace) {
  const SimConfig& cfg = *pr.cfg;
  const auto& grid = cfg.grid;
  const ServiceSampler& sample = pr.service.front();
  RandomStream arrivals(cfg.master_seed, r, StreamPurpose::Arrivals);
  RandomStream services(cfg.master_seed, r, StreamPurpose::Services);
  RandomStream initial(cfg.master_seed, r, StreamPurpose::Initial);
  const double horizon = grid.back();

  std::uint32_t departed = 0;
  std::size_t g = 0;
  auto emit = [&](double departure) {
    for (; g < grid.size() && grid[g] < departure; ++g) out[g] = departed;
    if (departure > 0.0) ++departed;
  };

  // FCFS: departures are nondecreasing, d_n = max(a_n, d_{n-1}) + S_n.
  double last_departure = 0.0;
  double a = 0.0;
  if (pr.warmup) {
    a = -pr.warmup_duration;
    last_departure = a;
  } else {
    const std::uint32_t q0 = initial_level(pr, initial);
    if (trace) trace->initial_queue = q0;
    for (std::uint32_t k = 0; k < q0; ++k) {
      last_departure += sample(services);
      emit(last_departure);
    }
  }

  std::uint32_t present_at_zero = 0;
  std::vector<double> pending;  // warm-up customers still present at time 0
  std::uint32_t admitted = 0;
  std::size_t ga = 0;
  for (;;) {
    a += arrivals.exponential(p.arrival_rate);
    if (g >= grid.size() && (!trace || a > horizon)) break;
    if (trace && a > 0.0) {
      for (; ga < grid.size() && grid[ga] < a; ++ga) trace->admitted[ga] = admitted;
      ++admitted;
    }
    const double d = std::max(a, last_departure) + sample(services);
    last_departure = d;
    if (a <= 0.0 && d > 0.0) ++present_at_zero;
    if (g < grid.size()) emit(d);
  }
  if (trace) {
    for (; ga < grid.size(); ++ga) trace->admitted[ga] = admitted;
    if (pr.warmup) trace->initial_queue = present_at_zero;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      trace->queue[i] = trace->initial_queue + trace->admitted[i] - out[i];
    }
  }
}

void run_replication(const Prepared& pr, std::uint32_t r, std::span<std::uint32_t> out,
                     ReplicationTrace* trace) {
  std::visit(overloaded{[&](const Mm1kParams& m) { run_mm1k(pr, m, r, out, trace); },
                        [&](const Mg1Params& m) { run_mg1(pr, m, r, out, trace); }},
             pr.cfg->model);
}

CountMatrix allocate(const SimConfig& cfg) {
  CountMatrix m;
  m.replications = cfg.replications;
  m.points = cfg.grid.size();
  m.values.assign(m.replications * m.points, 0u);
  return m;
}

}  // namespace

void validate(const SimConfig& cfg) {
  std::visit(overloaded{[](const Mm1kParams& m) { m.validate(); },
                        [](const Mg1Params& m) {
                          m.validate();
                          ServiceSampler check(m.service);
                        }},
             cfg.model);
  require(!cfg.grid.empty(), "grid must not be empty");
  require(cfg.grid.front() > 0.0, "grid must start above 0");
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    require(std::isfinite(cfg.grid[i]), "grid times must be finite");
    if (i > 0) require(cfg.grid[i] > cfg.grid[i - 1], "grid must be strictly increasing");
  }
  require(cfg.replications >= 2, "at least 2 replications are required");
  require(cfg.threads >= 0, "threads must be nonnegative");
  const auto* mm1k = std::get_if<Mm1kParams>(&cfg.model);
  std::visit(overloaded{
                 [](const EmptyStart&) {},
                 [&](const FixedStart& f) {
                   require(f.level >= 0, "fixed initial level must be nonnegative");
                   if (mm1k) require(f.level <= mm1k->capacity, "fixed initial level exceeds capacity");
                 },
                 [&](const PmfStart& p) {
                   require(!p.pmf.empty(), "initial pmf must not be empty");
                   if (mm1k) {
                     require(p.pmf.size() <= static_cast<std::size_t>(mm1k->capacity) + 1,
                             "initial pmf longer than capacity + 1");
                   }
                   double total = 0.0;
                   for (double w : p.pmf) {
                     require(w >= 0.0 && std::isfinite(w), "initial pmf entries must be nonnegative");
                     total += w;
                   }
                   require(std::abs(total - 1.0) <= 1e-9, "initial pmf must sum to 1");
                 },
                 [](const WarmupStart& w) {
                   require(w.duration > 0.0 && std::isfinite(w.duration), "warm-up must be positive");
                 },
                 [&](const EventStationaryStart&) {
                   require(mm1k != nullptr, "event-stationary start is only defined for mm1k");
                 }},
             cfg.initial);
}

InitialCondition stationary_start(const SimModel& model) {
  if (const auto* m = std::get_if<Mm1kParams>(&model)) return PmfStart{stationary_vector(*m)};
  return WarmupStart{};
}

CountMatrix simulate_counts(const SimConfig& cfg) {
  const Prepared pr = prepare(cfg);
  CountMatrix m = allocate(cfg);
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
  const auto n = static_cast<std::int64_t>(cfg.replications);
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto rr = static_cast<std::uint32_t>(r);
    run_replication(pr, rr, {m.values.data() + rr * m.points, m.points}, nullptr);
  }
  return m;
}

CountMatrix simulate_counts_serial(const SimConfig& cfg) {
  const Prepared pr = prepare(cfg);
  CountMatrix m = allocate(cfg);
  for (std::uint32_t r = 0; r < cfg.replications; ++r) {
    run_replication(pr, r, {m.values.data() + r * m.points, m.points}, nullptr);
  }
  return m;
}

ReplicationTrace simulate_replication(const SimConfig& cfg, std::uint32_t replication) {
  const Prepared pr = prepare(cfg);
  require(replication < cfg.replications, "replication index out of range");
  ReplicationTrace tr;
  const std::size_t n = cfg.grid.size();
  tr.departures.assign(n, 0u);
  tr.admitted.assign(n, 0u);
  tr.queue.assign(n, 0u);
  run_replication(pr, replication, tr.departures, &tr);
  return tr;
}

VarianceCurveEstimate estimate_variance_curve(const CountMatrix& counts,
                                              std::span<const double> grid, std::size_t groups) {
  const std::size_t n = counts.replications;
  const std::size_t points = counts.points;
  require(n >= 2, "at least 2 replications are required");
  require(grid.size() == points, "grid does not match the count matrix");

  VarianceCurveEstimate est;
  est.t.assign(grid.begin(), grid.end());
  est.mean.assign(points, 0.0);
  est.variance.assign(points, 0.0);
  est.half_width.assign(points, 0.0);
  est.replications = n;
  std::size_t g_count = std::min(groups, n / 2);
  if (g_count < 2) g_count = 0;
  est.groups = g_count;
  est.group_n.assign(g_count * points, 0.0);
  est.group_sum.assign(g_count * points, 0.0);
  est.group_sum_sq.assign(g_count * points, 0.0);

  const auto np = static_cast<std::int64_t>(points);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < np; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    unsigned __int128 sum = 0, sum_sq = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint64_t x = counts(r, i);
      sum += x;
      sum_sq += static_cast<unsigned __int128>(x) * x;
      if (g_count > 0) {
        const std::size_t g = r * g_count / n;
        est.group_n[g * points + i] += 1.0;
        est.group_sum[g * points + i] += static_cast<double>(x);
        est.group_sum_sq[g * points + i] += static_cast<double>(x * x);
      }
    }
    // n * sum_sq - sum^2 >= 0 exactly in integers.
    const unsigned __int128 num = static_cast<unsigned __int128>(n) * sum_sq - sum * sum;
    const double dn = static_cast<double>(n);
    const double mean = static_cast<double>(sum) / dn;
    const double var = static_cast<double>(num) / (dn * (dn - 1.0));
    double m4 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = counts(r, i) - mean;
      m4 += d * d * d * d;
    }
    m4 /= dn;
    // Var(s^2) = (mu4 - sigma^4 (n - 3) / (n - 1)) / n
    const double var_of_var = (m4 - var * var * (dn - 3.0) / (dn - 1.0)) / dn;
    est.mean[i] = mean;
    est.variance[i] = var;
    est.half_width[i] = 1.959963984540054 * std::sqrt(std::max(0.0, var_of_var));
  }
  return est;
}

namespace {

struct Line {
  double slope, intercept;
};

Line weighted_line(std::span<const double> t, std::span<const double> y, std::span<const double> w) {
  double sw = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sw += w[i];
    st += w[i] * t[i];
    sy += w[i] * y[i];
  }
  const double tm = st / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxx += w[i] * (t[i] - tm) * (t[i] - tm);
    sxy += w[i] * (t[i] - tm) * (y[i] - ym);
  }
  const double slope = sxy / sxx;
  return {slope, ym - slope * tm};
}

}  // namespace

LinearTailFit fit_linear_tail(const VarianceCurveEstimate& est, double window_fraction) {
  require(window_fraction > 0.0 && window_fraction <= 1.0, "window fraction must lie in (0, 1]");
  const std::size_t n = est.t.size();
  const auto m = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n) - 1e-9));
  if (m < 5 || m > n) {
    throw Error(ErrorCode::InsufficientPoints,
                "tail window holds " + std::to_string(std::min(m, n)) + " points, need 5");
  }
  const std::size_t first = n - m;
  std::span<const double> t(est.t.data() + first, m);
  std::span<const double> y(est.variance.data() + first, m);

  bool widths = est.half_width.size() == n;
  for (std::size_t i = first; widths && i < n; ++i) widths = est.half_width[i] > 0.0;
  std::vector<double> w(m, 1.0);
  if (widths) {
    for (std::size_t i = 0; i < m; ++i) {
      const double h = est.half_width[first + i];
      w[i] = 1.0 / (h * h);
    }
  }

  const Line line = weighted_line(t, y, w);
  LinearTailFit fit;
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.t_low = t.front();
  fit.t_high = t.back();
  fit.points = m;

  double sw = 0.0, st = 0.0, ssr = 0.0, wssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double res = y[i] - (line.slope * t[i] + line.intercept);
    ssr += res * res;
    wssr += w[i] * res * res;
    sw += w[i];
    st += w[i] * t[i];
  }
  fit.residual_rms = std::sqrt(ssr / static_cast<double>(m));
  const double tm = st / sw;
  double sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) sxx += w[i] * (t[i] - tm) * (t[i] - tm);

  if (est.groups >= 2 && est.group_n.size() == est.groups * n) {
    // Delete-a-group jackknife. Grid points share replications, so their
    // errors are strongly correlated; the model-based errors would ignore that.
    const std::size_t G = est.groups;
    std::vector<double> slopes(G), intercepts(G), yg(m);
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = first + i;
        double cnt = 0.0, s = 0.0, s2 = 0.0;
        for (std::size_t h = 0; h < G; ++h) {
          if (h == g) continue;
          cnt += est.group_n[h * n + k];
          s += est.group_sum[h * n + k];
          s2 += est.group_sum_sq[h * n + k];
        }
        yg[i] = (s2 - s * s / cnt) / (cnt - 1.0);
      }
      const Line lg = weighted_line(t, yg, w);
      slopes[g] = lg.slope;
      intercepts[g] = lg.intercept;
    }
    auto jackknife_se = [G](const std::vector<double>& v) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(G);
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::sqrt(ss * static_cast<double>(G - 1) / static_cast<double>(G));
    };
    fit.slope_se = jackknife_se(slopes);
    fit.intercept_se = jackknife_se(intercepts);
    fit.error_method = LinearTailFit::ErrorMethod::Jackknife;
  } else if (widths) {
    // Half widths are 1.96 sigma.
    const double z2 = 1.959963984540054 * 1.959963984540054;
    const double var_slope = 1.0 / (z2 * sxx);
    fit.slope_se = std::sqrt(var_slope);
    fit.intercept_se = std::sqrt(1.0 / (z2 * sw) + tm * tm * var_slope);
    fit.error_method = LinearTailFit::ErrorMethod::Model;
  } else {
    const double s2 = wssr / static_cast<double>(m - 2);
    const double var_slope = s2 / sxx;
    fit.slope_se = std::sqrt(var_slope);
    fit.intercept_se = std::sqrt(s2 / sw + tm * tm * var_slope);
    fit.error_method = LinearTailFit::ErrorMethod::Residual;
  }
  return fit;
}

}  // namespace varcurve
