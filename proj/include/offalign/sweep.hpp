#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "offalign/algorithms.hpp"
#include "offalign/divergences.hpp"
#include "offalign/serialize.hpp"
#include "offalign/svg.hpp"

namespace offalign {

// Monte-Carlo sweep harness. A sweep is fully determined by its config: every
// random stream is derived from (master_seed, grid coordinates), rows are
// sorted before writing, and floats are printed with 17 significant digits,
// so identical configs produce byte-identical output files.
struct SweepConfig {
  // instance family: illustrative | rpo_lower | random
  std::string instance_kind = "rpo_lower";
  std::uint64_t instance_seed = 1;   // random family
  std::size_t instance_contexts = 2;
  std::size_t instance_actions = 4;
  double instance_r_max = 1.0;
  double zeta = -1.0;                // rpo_lower override; negative -> default

  std::vector<std::string> algorithms{"chipo", "dpo"};
  std::vector<std::size_t> n_grid{10, 100};
  std::vector<double> beta_grid{0.05, 0.1};
  std::size_t seeds = 10;
  std::uint64_t master_seed = 0;

  std::vector<std::size_t> condition_on_event;  // forbidden actions; empty = unconditioned
  std::size_t max_event_resamples = 1000000;

  std::string comparator = "point:0";  // point:<a> | piref | greedy
  std::string tie_break = "adversarial";

  double sft_alpha = 0.05;
  double rlhf_eta = -1.0;  // negative -> beta/(8*r_max)
  std::size_t iter_T = 64;
  std::size_t iter_m = 1000;
  double iter_eta = 0.5;

  std::string out_dir = ".";
  std::string format = "csv";  // csv | json
  std::size_t jobs = 1;

  void validate() const {
    if (n_grid.empty() || beta_grid.empty()) throw ConfigError("SweepConfig: empty grid");
    if (seeds < 1) throw ConfigError("SweepConfig: seeds must be >= 1");
    if (algorithms.empty()) throw ConfigError("SweepConfig: no algorithms");
    for (const auto& a : algorithms)
      if (a != "chipo" && a != "dpo" && a != "dpo_sft" && a != "chi2_rlhf" && a != "iter_chipo")
        throw ConfigError("SweepConfig: unknown algorithm '" + a + "'");
    if (format != "csv" && format != "json")
      throw ConfigError("SweepConfig: format must be csv or json");
    if (instance_kind != "illustrative" && instance_kind != "rpo_lower" &&
        instance_kind != "random")
      throw ConfigError("SweepConfig: unknown instance kind '" + instance_kind + "'");
  }
};

struct SweepRow {
  std::string algorithm;
  std::size_t n = 0;
  double beta = 0.0;
  std::size_t seed = 0;
  double regret = 0.0;
  double c_one = 0.0;
  double kl = 0.0;
  long long event_resamples = 0;  // -1 flags a row whose event never held
};

namespace detail {

inline NamedInstance make_sweep_instance(const SweepConfig& cfg, std::size_t n) {
  if (cfg.instance_kind == "illustrative") return illustrative(n);
  if (cfg.instance_kind == "rpo_lower")
    return rpo_lower(n, cfg.zeta >= 0.0 ? std::optional<double>(cfg.zeta) : std::nullopt);
  NamedInstance ni = random_instance(cfg.instance_seed, cfg.instance_contexts,
                                     cfg.instance_actions, cfg.instance_r_max);
  ni.reward_class = {ni.instance.r_star()};
  return ni;
}

inline Policy resolve_comparator(const Instance& inst, const std::string& spec) {
  if (spec == "piref") return inst.pi_ref();
  if (spec == "greedy") {
    Matrix probs(inst.n_contexts(), inst.n_actions(), 0.0);
    for (std::size_t x = 0; x < inst.n_contexts(); ++x) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < inst.n_actions(); ++a)
        if (inst.r_star()(x, a) > inst.r_star()(x, best)) best = a;
      probs(x, best) = 1.0;
    }
    return Policy(std::move(probs));
  }
  if (spec.rfind("point:", 0) == 0) {
    const std::size_t a = std::stoul(spec.substr(6));
    if (a >= inst.n_actions()) throw ConfigError("comparator action out of range");
    return Policy::point_mass(inst.n_contexts(), inst.n_actions(), a);
  }
  throw ConfigError("SweepConfig: unknown comparator '" + spec + "'");
}

inline TieBreak resolve_tie_break(const std::string& spec) {
  if (spec == "first") return TieBreak::first();
  if (spec == "last") return TieBreak::last();
  if (spec == "adversarial") return TieBreak::adversarial(nullptr);
  throw ConfigError("SweepConfig: unknown tie_break '" + spec + "'");
}

// Rejection-resample until the conditioning event holds; the attempt index is
// folded into the stream seed. Returns the resample count, -1 on exhaustion.
inline std::pair<PreferenceDataset, long long> sample_conditioned(const Instance& inst,
                                                                  std::size_t n,
                                                                  std::uint64_t stream,
                                                                  const SweepConfig& cfg) {
  for (std::size_t attempt = 0;; ++attempt) {
    PreferenceDataset data = sample_preferences(inst, n, mix_seed(stream, attempt));
    if (cfg.condition_on_event.empty() || bad_event_holds(data, cfg.condition_on_event))
      return {std::move(data), static_cast<long long>(attempt)};
    if (attempt + 1 >= cfg.max_event_resamples) return {std::move(data), -1};
  }
}

inline Policy run_sweep_algorithm(const std::string& alg, const NamedInstance& named,
                                  const PreferenceDataset& data, double beta,
                                  const SweepConfig& cfg, std::uint64_t stream) {
  const Instance& inst = named.instance;
  const TieBreak tie = resolve_tie_break(cfg.tie_break);
  if (alg == "chipo") {
    return run_offline_alignment(
        inst, data, RewardInducedClass{named.reward_class, LinkSpec::mixed_chi2(1.0), beta},
        ObjectiveConfig::chipo(beta, inst.r_max()), tie);
  }
  if (alg == "dpo") {
    return run_offline_alignment(inst, data,
                                 RewardInducedClass{named.reward_class, LinkSpec::kl(), beta},
                                 ObjectiveConfig::dpo(beta, inst.r_max()), tie);
  }
  if (alg == "dpo_sft") {
    return run_offline_alignment(
        inst, data, RewardInducedClass{named.reward_class, LinkSpec::kl(), beta},
        ObjectiveConfig::dpo_sft(beta, cfg.sft_alpha, inst.r_max()), tie);
  }
  if (alg == "chi2_rlhf") {
    Rng rng(mix_seed(stream, 0xd8ULL));
    ContextDataset dx;
    dx.contexts.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      dx.contexts.push_back(rng.categorical(std::span<const double>(inst.rho())));
    const double eta = cfg.rlhf_eta >= 0.0 ? cfg.rlhf_eta : beta / (8.0 * inst.r_max());
    return run_chi2_rlhf(inst, data, dx, named.reward_class, beta, eta, tie);
  }
  if (alg == "iter_chipo") {
    std::vector<PreferenceFunction> pref_class;
    pref_class.reserve(named.reward_class.size());
    for (const auto& r : named.reward_class)
      pref_class.push_back(PreferenceFunction::from_bradley_terry(r));
    IterativeChiPOConfig icfg;
    icfg.beta = beta;
    icfg.eta = cfg.iter_eta;
    icfg.iterations = cfg.iter_T;
    icfg.unlabeled_samples = cfg.iter_m;
    return run_iterative_chipo(inst, data, pref_class, icfg, mix_seed(stream, 0x17ULL)).mixture;
  }
  throw ConfigError("unknown algorithm '" + alg + "'");
}

inline std::vector<std::vector<std::string>> rows_to_strings(const std::vector<SweepRow>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows)
    out.push_back({r.algorithm, std::to_string(r.n), fmt_double(r.beta), std::to_string(r.seed),
                   fmt_double(r.regret), fmt_double(r.c_one), fmt_double(r.kl),
                   std::to_string(r.event_resamples)});
  return out;
}

// Run `total` tasks across `jobs` threads; tasks only write into disjoint
// slots, so no synchronization beyond the shared counter is needed.
template <typename Fn>
inline void parallel_for(std::size_t total, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, total));
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline const std::vector<std::string> kSweepHeader = {
    "algorithm", "n", "beta", "seed", "regret", "c_one", "kl", "event_resamples"};

// For each (algorithm, n, beta, seed): sample a dataset (conditioned on the
// bad event when configured), run the algorithm, and record regret against
// the comparator together with the learned policy's coverage. One dataset is
// shared by all algorithms and betas at a given (n, seed).
inline std::vector<SweepRow> regret_sweep(const SweepConfig& cfg,
                                          const std::string& out_path = "") {
  cfg.validate();

  struct Cell {
    std::vector<SweepRow> rows;
  };
  const std::size_t tasks = cfg.n_grid.size() * cfg.seeds;
  std::vector<Cell> cells(tasks);

  detail::parallel_for(tasks, cfg.jobs, [&](std::size_t task) {
    const std::size_t ni = task / cfg.seeds;
    const std::size_t seed = task % cfg.seeds;
    const std::size_t n = cfg.n_grid[ni];
    const NamedInstance named = detail::make_sweep_instance(cfg, n);
    const Policy comparator = detail::resolve_comparator(named.instance, cfg.comparator);

    const std::uint64_t data_stream = mix_seed(cfg.master_seed, 0xda7aULL, ni, seed);
    auto [data, resamples] = detail::sample_conditioned(named.instance, n, data_stream, cfg);

    for (const auto& alg : cfg.algorithms) {
      for (double beta : cfg.beta_grid) {
        SweepRow row;
        row.algorithm = alg;
        row.n = n;
        row.beta = beta;
        row.seed = seed;
        row.event_resamples = resamples;
        if (resamples < 0) {
          row.regret = row.c_one = row.kl = std::numeric_limits<double>::quiet_NaN();
        } else {
          const Policy learned = detail::run_sweep_algorithm(
              alg, named, data, beta, cfg, mix_seed(cfg.master_seed, 0xa19ULL, ni, seed));
          row.regret = regret(named.instance, comparator, learned);
          const CoverageReport cov = coverage(named.instance, learned);
          row.c_one = cov.c_one;
          row.kl = cov.kl;
        }
        cells[task].rows.push_back(std::move(row));
      }
    }
  });

  std::vector<SweepRow> rows;
  for (auto& c : cells)
    for (auto& r : c.rows) rows.push_back(std::move(r));
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.algorithm, a.n, a.beta, a.seed) < std::tie(b.algorithm, b.n, b.beta, b.seed);
  });

  if (!out_path.empty()) {
    if (cfg.format == "csv")
      write_csv(out_path, kSweepHeader, detail::rows_to_strings(rows));
    else
      write_rows_json(out_path, kSweepHeader, detail::rows_to_strings(rows));
  }
  return rows;
}

// One named policy (at one beta) for the action-distribution report.
struct NamedPolicy {
  std::string name;
  double beta = 0.0;
  Policy policy;
};

// Per-action probabilities for each named policy, as CSV rows and a line
// chart over beta. Multi-context instances are reported through the
// rho-weighted marginal action distribution.
inline void action_distribution_report(const Instance& instance,
                                       const std::vector<NamedPolicy>& policies,
                                       const std::string& csv_path, const std::string& svg_path,
                                       const std::string& format = "csv") {
  std::vector<std::vector<std::string>> rows;
  const std::vector<std::string> header = {"policy", "beta", "action", "probability"};
  for (const auto& np : policies) {
    require_same_shape(np.policy.probs(), instance.pi_ref().probs(),
                       "action_distribution_report");
    for (std::size_t a = 0; a < instance.n_actions(); ++a) {
      double marg = 0.0;
      for (std::size_t x = 0; x < instance.n_contexts(); ++x)
        marg += instance.rho()[x] * np.policy(x, a);
      rows.push_back({np.name, fmt_double(np.beta), std::to_string(a), fmt_double(marg)});
    }
  }
  if (format == "csv")
    write_csv(csv_path, header, rows);
  else
    write_rows_json(csv_path, header, rows);

  if (!svg_path.empty()) {
    // one series per (policy, action), x = beta
    std::vector<std::string> names;
    for (const auto& np : policies)
      if (std::find(names.begin(), names.end(), np.name) == names.end())
        names.push_back(np.name);
    std::vector<svg::Series> series;
    for (const auto& name : names)
      for (std::size_t a = 0; a < instance.n_actions(); ++a) {
        svg::Series s;
        s.name = name + " a" + std::to_string(a);
        for (const auto& np : policies) {
          if (np.name != name) continue;
          double marg = 0.0;
          for (std::size_t x = 0; x < instance.n_contexts(); ++x)
            marg += instance.rho()[x] * np.policy(x, a);
          s.x.push_back(np.beta);
          s.y.push_back(marg);
        }
        if (s.x.size() > 1 || names.size() == 1) series.push_back(std::move(s));
      }
    svg::ChartOptions opt;
    opt.title = "Action probabilities vs beta";
    opt.x_label = "beta";
    opt.y_label = "probability";
    opt.log_x = true;
    svg::write_line_chart(svg_path, series, opt);
  }
}

// phi and phi^{-1} samples for a set of links, exported as CSV and a chart.
inline void link_curve_export(const std::vector<std::pair<std::string, LinkSpec>>& specs,
                              const std::vector<double>& z_grid,
                              const std::vector<double>& y_grid, const std::string& csv_path,
                              const std::string& svg_path, const std::string& format = "csv") {
  std::vector<std::vector<std::string>> rows;
  const std::vector<std::string> header = {"link", "curve", "input", "value"};
  std::vector<svg::Series> series;
  for (const auto& [name, spec] : specs) {
    svg::Series phi_s, inv_s;
    phi_s.name = name + " phi";
    inv_s.name = name + " phi_inv";
    for (double z : z_grid) {
      const double v = link_value(spec, z);
      rows.push_back({name, "phi", fmt_double(z), fmt_double(v)});
      phi_s.x.push_back(z);
      phi_s.y.push_back(v);
    }
    for (double y : y_grid) {
      const double v = link_inverse(spec, y);
      rows.push_back({name, "phi_inv", fmt_double(y), fmt_double(v)});
      inv_s.x.push_back(y);
      inv_s.y.push_back(v);
    }
    series.push_back(std::move(phi_s));
    series.push_back(std::move(inv_s));
  }
  if (format == "csv")
    write_csv(csv_path, header, rows);
  else
    write_rows_json(csv_path, header, rows);
  if (!svg_path.empty()) {
    svg::ChartOptions opt;
    opt.title = "Link functions and inverses";
    opt.x_label = "input";
    opt.y_label = "value";
    svg::write_line_chart(svg_path, series, opt);
  }
}

// Exact KL divergence between the two sampling distributions
// rho x piref x piref x P_i induced by two preference functions over a shared
// instance. Uses the 0*log(0/q) = 0 convention.
inline double sampling_kl(const Instance& instance, const PreferenceFunction& l1,
                          const PreferenceFunction& l2) {
  double total = 0.0;
  for (std::size_t x = 0; x < instance.n_contexts(); ++x)
    for (std::size_t a = 0; a < instance.n_actions(); ++a)
      for (std::size_t b = 0; b < instance.n_actions(); ++b) {
        const double w =
            instance.rho()[x] * instance.pi_ref()(x, a) * instance.pi_ref()(x, b);
        if (w == 0.0) continue;
        const double p1 = 0.5 * (1.0 + l1(x, a, b));
        const double p2 = 0.5 * (1.0 + l2(x, a, b));
        for (const auto [q1, q2] : {std::pair{p1, p2}, std::pair{1.0 - p1, 1.0 - p2}}) {
          if (q1 == 0.0) continue;
          total += w * q1 * std::log(q1 / q2);
        }
      }
  return total;
}

// Seeded fully-covered skew game for the self-play experiments: reference
// rows are Dirichlet mixed half-and-half with uniform (bounded away from
// zero), preference values uniform in [-scale, scale].
inline NamedInstance random_game(std::uint64_t seed, std::size_t n_contexts,
                                 std::size_t n_actions, double scale = 0.8) {
  Rng rng(mix_seed(seed, 0x67616d65ULL));
  std::vector<double> rho = rng.dirichlet_uniform(n_contexts);
  Matrix ref(n_contexts, n_actions);
  for (std::size_t x = 0; x < n_contexts; ++x) {
    auto row = rng.dirichlet_uniform(n_actions);
    for (std::size_t a = 0; a < n_actions; ++a)
      ref(x, a) = 0.5 * row[a] + 0.5 / static_cast<double>(n_actions);
  }
  std::vector<double> raw(n_contexts * n_actions * n_actions);
  for (auto& v : raw) v = rng.uniform(-scale, scale);
  NamedInstance out;
  out.instance = Instance(std::move(rho), RewardModel::constant(n_contexts, n_actions, 0.0), 1.0,
                          Policy(std::move(ref)));
  out.pref = PreferenceFunction::from_upper(
      n_contexts, n_actions, [&](std::size_t x, std::size_t a, std::size_t b) {
        return raw[(x * n_actions + a) * n_actions + b];
      });
  out.metadata = "random_game(seed=" + std::to_string(seed) + ")";
  return out;
}

struct DgConfig {
  std::uint64_t game_seed = 7;
  std::size_t game_contexts = 2;
  std::size_t game_actions = 3;
  double game_scale = 0.8;
  std::vector<std::size_t> n_grid{10000};
  std::vector<std::size_t> m_grid{10000};
  std::vector<std::size_t> t_grid{64};
  double beta = 0.05;
  double eta = 0.5;
  std::size_t seeds = 20;
  std::uint64_t master_seed = 0;
  double impossibility_c = 2.0;
  double mesh = 0.01;
  std::size_t jobs = 1;
};

struct DgRow {
  std::string kind;
  std::size_t n = 0, m = 0, t = 0, seed = 0;
  double value = 0.0;
};

inline const std::vector<std::string> kDgHeader = {"kind", "n", "m", "T", "seed", "value"};

// Realizable preference class for the self-play runs: the truth plus scaled,
// flipped, zero, and random decoys.
inline std::vector<PreferenceFunction> make_pref_class(const NamedInstance& game) {
  const PreferenceFunction& truth = *game.pref;
  const std::size_t X = truth.n_contexts(), A = truth.n_actions();
  std::vector<PreferenceFunction> cls;
  const auto scaled = [&](double factor) {
    return PreferenceFunction::from_upper(
        X, A, [&](std::size_t x, std::size_t a, std::size_t b) { return factor * truth(x, a, b); });
  };
  cls.push_back(scaled(0.5));
  cls.push_back(scaled(-1.0));
  cls.push_back(PreferenceFunction::zero(X, A));
  cls.push_back(truth);
  Rng rng(mix_seed(0xdecf, X, A));
  for (int k = 0; k < 3; ++k) {
    std::vector<double> raw(X * A * A);
    for (auto& v : raw) v = rng.uniform(-1.0, 1.0);
    cls.push_back(PreferenceFunction::from_upper(
        X, A, [&](std::size_t x, std::size_t a, std::size_t b) {
          return raw[(x * A + a) * A + b];
        }));
  }
  return cls;
}

// Duality-gap experiments: (a) iterative self-play over the (n, m, T) grid,
// (b) the impossibility pair, reporting the grid-verified lower bound on
// DG1 + DG2, the cross-instance gap of each candidate output, and the exact
// KL between the two sampling distributions.
inline std::vector<DgRow> dg_experiment(const DgConfig& cfg, const std::string& out_path = "",
                                        const std::string& format = "csv") {
  std::vector<DgRow> rows;

  const NamedInstance game =
      random_game(cfg.game_seed, cfg.game_contexts, cfg.game_actions, cfg.game_scale);
  const auto pref_class = make_pref_class(game);

  struct Task {
    std::size_t n, m, t, seed;
  };
  std::vector<Task> tasks;
  for (std::size_t n : cfg.n_grid)
    for (std::size_t m : cfg.m_grid)
      for (std::size_t t : cfg.t_grid)
        for (std::size_t seed = 0; seed < cfg.seeds; ++seed) tasks.push_back({n, m, t, seed});
  std::vector<DgRow> iter_rows(tasks.size());
  detail::parallel_for(tasks.size(), cfg.jobs, [&](std::size_t i) {
    const auto [n, m, t, seed] = tasks[i];
    const auto data = sample_preferences_general(game.instance, *game.pref, n,
                                                 mix_seed(cfg.master_seed, n, m, seed));
    IterativeChiPOConfig icfg;
    icfg.beta = cfg.beta;
    icfg.eta = cfg.eta;
    icfg.iterations = t;
    icfg.unlabeled_samples = m;
    const auto result = run_iterative_chipo(game.instance, data, pref_class, icfg,
                                            mix_seed(cfg.master_seed, 0x17ULL, i));
    iter_rows[i] = {"iter_dg", n, m, t, seed,
                    duality_gap(game.instance.rho(), *game.pref, result.mixture)};
  });
  rows.insert(rows.end(), iter_rows.begin(), iter_rows.end());

  // impossibility pair
  const auto [one, two] = general_lower(cfg.impossibility_c);
  const Instance& inst = one.instance;
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / cfg.mesh));
  double min_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= steps; ++i)
    for (std::size_t j = 0; i + j <= steps; ++j)
      for (std::size_t k = 0; i + j + k <= steps; ++k) {
        Matrix probs(1, 4, 0.0);
        probs(0, 0) = static_cast<double>(i) / static_cast<double>(steps);
        probs(0, 1) = static_cast<double>(j) / static_cast<double>(steps);
        probs(0, 2) = static_cast<double>(k) / static_cast<double>(steps);
        probs(0, 3) = static_cast<double>(steps - i - j - k) / static_cast<double>(steps);
        const Policy pol(std::move(probs));
        const double sum = duality_gap(inst.rho(), *one.pref, pol) +
                           duality_gap(inst.rho(), *two.pref, pol);
        min_sum = std::min(min_sum, sum);
      }
  rows.push_back({"impossibility_grid_min", 0, 0, 0, 0, min_sum});

  const Policy mw1 = minimax_winner(inst.rho(), *one.pref, 1e-3, 200000).policy;
  const Policy mw2 = minimax_winner(inst.rho(), *two.pref, 1e-3, 200000).policy;
  const auto cross = [&](const Policy& pol) {
    return std::max(duality_gap(inst.rho(), *one.pref, pol),
                    duality_gap(inst.rho(), *two.pref, pol));
  };
  rows.push_back({"cross_dg_max_mw1", 0, 0, 0, 0, cross(mw1)});
  rows.push_back({"cross_dg_max_mw2", 0, 0, 0, 0, cross(mw2)});
  rows.push_back({"cross_dg_max_piref", 0, 0, 0, 0, cross(inst.pi_ref())});
  rows.push_back({"sampling_kl", 0, 0, 0, 0, sampling_kl(inst, *one.pref, *two.pref)});

  if (!out_path.empty()) {
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (const auto& r : rows)
      cells.push_back({r.kind, std::to_string(r.n), std::to_string(r.m), std::to_string(r.t),
                       std::to_string(r.seed), fmt_double(r.value)});
    if (format == "csv")
      write_csv(out_path, kDgHeader, cells);
    else
      write_rows_json(out_path, kDgHeader, cells);
  }
  return rows;
}

}  // namespace offalign
