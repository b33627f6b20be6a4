// Command-line front end: canonical instance emission, Monte-Carlo regret
// sweeps, action-distribution and link-curve exports, and the general
// preference-game experiments. Exit codes: 0 success, 2 configuration error,
// 3 solver failure.

#include <clocale>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "offalign/algorithms.hpp"
#include "offalign/serialize.hpp"
#include "offalign/sweep.hpp"

using namespace offalign;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

fs::path ensure_out_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void emit_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string());
  out << text;
}

int run_instance(const std::string& kind, std::size_t n, double zeta, double cap,
                 std::uint64_t seed, std::size_t contexts, std::size_t actions, double r_max,
                 const std::string& out_dir) {
  const fs::path dir = ensure_out_dir(out_dir);
  std::vector<NamedInstance> emitted;
  if (kind == "illustrative") {
    emitted.push_back(illustrative(n));
  } else if (kind == "rpo_lower") {
    emitted.push_back(rpo_lower(n, zeta >= 0.0 ? std::optional<double>(zeta) : std::nullopt));
  } else if (kind == "general_lower") {
    auto [one, two] = general_lower(cap);
    emitted.push_back(std::move(one));
    emitted.push_back(std::move(two));
  } else if (kind == "random") {
    emitted.push_back(random_instance(seed, contexts, actions, r_max));
  } else {
    throw ConfigError("unknown instance kind '" + kind + "'");
  }
  for (std::size_t i = 0; i < emitted.size(); ++i) {
    const std::string name =
        kind + (emitted.size() > 1 ? "_" + std::to_string(i + 1) : "") + ".json";
    emit_text(dir / name, named_instance_to_json(emitted[i]).dump(2) + "\n");
    matrix_to_csv((dir / (kind + (emitted.size() > 1 ? "_" + std::to_string(i + 1) : "") +
                          "_r_star.csv"))
                      .string(),
                  emitted[i].instance.r_star().values());
    std::printf("wrote %s\n", (dir / name).string().c_str());
  }
  return kExitOk;
}

int run_sweep(const SweepConfig& cfg) {
  const fs::path dir = ensure_out_dir(cfg.out_dir);
  const fs::path out = dir / ("sweep." + cfg.format);
  const auto rows = regret_sweep(cfg, out.string());
  std::printf("wrote %s (%zu rows)\n", out.string().c_str(), rows.size());
  return kExitOk;
}

int run_actions(std::size_t n, std::vector<double> betas, std::uint64_t seed,
                const std::string& out_dir, const std::string& format) {
  const auto named = illustrative(n);
  const Instance& inst = named.instance;

  // condition on the bad event so the adversarially tied reward model drives
  // both policies, as in the worked example
  PreferenceDataset data;
  std::uint64_t attempt = 0;
  do {
    data = sample_preferences(inst, n, mix_seed(seed, attempt++));
  } while (!bad_event_holds(data, {1, 2}));

  std::vector<NamedPolicy> policies;
  for (double beta : betas) {
    const auto adversarial = [&](const LinkSpec& link) {
      return TieBreak::adversarial([&, link](std::size_t i) {
        return expected_return(inst, induced_policy(inst, named.reward_class[i], beta, link),
                               inst.r_star());
      });
    };
    policies.push_back(
        {"chipo", beta,
         run_offline_alignment(inst, data,
                               RewardInducedClass{named.reward_class, LinkSpec::mixed_chi2(1.0),
                                                  beta},
                               ObjectiveConfig::chipo(beta, inst.r_max()),
                               adversarial(LinkSpec::mixed_chi2(1.0)))});
    policies.push_back(
        {"dpo", beta,
         run_offline_alignment(inst, data,
                               RewardInducedClass{named.reward_class, LinkSpec::kl(), beta},
                               ObjectiveConfig::dpo(beta, inst.r_max()),
                               adversarial(LinkSpec::kl()))});
    policies.push_back({"piref", beta, inst.pi_ref()});
  }
  const fs::path dir = ensure_out_dir(out_dir);
  const fs::path csv = dir / ("actions." + format);
  const fs::path svg = dir / "actions.svg";
  action_distribution_report(inst, policies, csv.string(), svg.string(), format);
  std::printf("wrote %s and %s\n", csv.string().c_str(), svg.string().c_str());
  return kExitOk;
}

int run_links(double y_min, double y_max, double y_step, const std::string& out_dir,
              const std::string& format) {
  std::vector<double> y_grid, z_grid;
  const auto y_count = static_cast<std::size_t>(std::floor((y_max - y_min) / y_step + 1e-9));
  for (std::size_t i = 0; i <= y_count; ++i) y_grid.push_back(y_min + y_step * i);
  for (std::size_t i = 1; i <= 200; ++i) z_grid.push_back(0.05 * i);
  const fs::path dir = ensure_out_dir(out_dir);
  const fs::path csv = dir / ("links." + format);
  const fs::path svg = dir / "links.svg";
  link_curve_export({{"chipo", LinkSpec::mixed_chi2(1.0)}, {"dpo", LinkSpec::kl()}}, z_grid,
                    y_grid, csv.string(), svg.string(), format);
  std::printf("wrote %s and %s\n", csv.string().c_str(), svg.string().c_str());
  return kExitOk;
}

int run_games(DgConfig cfg, const std::string& out_dir, const std::string& format) {
  const fs::path dir = ensure_out_dir(out_dir);
  const fs::path out = dir / ("games." + format);
  const auto rows = dg_experiment(cfg, out.string(), format);
  std::printf("wrote %s (%zu rows)\n", out.string().c_str(), rows.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_NUMERIC, "C");
  CLI::App app{"Tabular offline-alignment laboratory"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::string out_dir = ".";
  std::string format = "csv";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  app.add_option("--format", format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", jobs, "Parallel seed fan-out")->capture_default_str();

  // instance
  auto* inst_cmd = app.add_subcommand("instance", "Emit a canonical instance as JSON");
  std::string inst_kind = "illustrative";
  std::size_t inst_n = 10, inst_contexts = 2, inst_actions = 4;
  double inst_zeta = -1.0, inst_cap = 2.0, inst_r_max = 1.0;
  inst_cmd->add_option("--kind", inst_kind,
                       "illustrative | rpo_lower | general_lower | random")
      ->capture_default_str();
  inst_cmd->add_option("--n", inst_n, "Construction parameter n")->capture_default_str();
  inst_cmd->add_option("--zeta", inst_zeta, "rpo_lower zeta override (negative = default)")
      ->capture_default_str();
  inst_cmd->add_option("--coverage", inst_cap, "general_lower coverage parameter C")
      ->capture_default_str();
  inst_cmd->add_option("--contexts", inst_contexts, "random instance contexts")
      ->capture_default_str();
  inst_cmd->add_option("--actions", inst_actions, "random instance actions")
      ->capture_default_str();
  inst_cmd->add_option("--r-max", inst_r_max, "random instance reward bound")
      ->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo regret sweep");
  SweepConfig sweep_cfg;
  sweep_cmd->add_option("--instance", sweep_cfg.instance_kind,
                        "illustrative | rpo_lower | random")
      ->capture_default_str();
  sweep_cmd->add_option("--algorithms", sweep_cfg.algorithms,
                        "chipo dpo dpo_sft chi2_rlhf iter_chipo")
      ->capture_default_str();
  sweep_cmd->add_option("--n-grid", sweep_cfg.n_grid, "Dataset sizes")->capture_default_str();
  sweep_cmd->add_option("--beta-grid", sweep_cfg.beta_grid, "Regularization grid")
      ->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_cfg.seeds, "Monte-Carlo replications")
      ->capture_default_str();
  sweep_cmd->add_option("--condition-on-event", sweep_cfg.condition_on_event,
                        "Forbidden actions for rejection resampling");
  sweep_cmd->add_option("--comparator", sweep_cfg.comparator, "point:<a> | piref | greedy")
      ->capture_default_str();
  sweep_cmd->add_option("--tie-break", sweep_cfg.tie_break, "first | last | adversarial")
      ->capture_default_str();
  sweep_cmd->add_option("--sft-alpha", sweep_cfg.sft_alpha, "SFT weight for dpo_sft")
      ->capture_default_str();
  sweep_cmd->add_option("--rlhf-eta", sweep_cfg.rlhf_eta,
                        "Smoothing for chi2_rlhf (negative = beta/(8 Rmax))")
      ->capture_default_str();
  sweep_cmd->add_option("--iter-T", sweep_cfg.iter_T, "Self-play iterations")
      ->capture_default_str();
  sweep_cmd->add_option("--iter-m", sweep_cfg.iter_m, "Self-play unlabeled samples")
      ->capture_default_str();
  sweep_cmd->add_option("--iter-eta", sweep_cfg.iter_eta, "Self-play stepsize")
      ->capture_default_str();
  sweep_cmd->add_option("--zeta", sweep_cfg.zeta, "rpo_lower zeta override")
      ->capture_default_str();
  sweep_cmd->add_option("--instance-seed", sweep_cfg.instance_seed, "random instance seed")
      ->capture_default_str();
  sweep_cmd->add_option("--instance-contexts", sweep_cfg.instance_contexts)
      ->capture_default_str();
  sweep_cmd->add_option("--instance-actions", sweep_cfg.instance_actions)
      ->capture_default_str();

  // actions
  auto* actions_cmd =
      app.add_subcommand("actions", "Action-distribution report on the worked example");
  std::size_t actions_n = 10;
  std::vector<double> actions_betas;
  actions_cmd->add_option("--n", actions_n, "Construction parameter n")->capture_default_str();
  actions_cmd->add_option("--betas", actions_betas, "Beta grid (default log grid)");

  // links
  auto* links_cmd = app.add_subcommand("links", "Export link-function curves");
  double y_min = -5.0, y_max = 5.0, y_step = 0.1;
  links_cmd->add_option("--y-min", y_min)->capture_default_str();
  links_cmd->add_option("--y-max", y_max)->capture_default_str();
  links_cmd->add_option("--y-step", y_step)->capture_default_str();

  // games
  auto* games_cmd =
      app.add_subcommand("games", "Self-play duality gaps and the impossibility pair");
  DgConfig dg_cfg;
  games_cmd->add_option("--game-seed", dg_cfg.game_seed)->capture_default_str();
  games_cmd->add_option("--contexts", dg_cfg.game_contexts)->capture_default_str();
  games_cmd->add_option("--actions", dg_cfg.game_actions)->capture_default_str();
  games_cmd->add_option("--n-grid", dg_cfg.n_grid)->capture_default_str();
  games_cmd->add_option("--m-grid", dg_cfg.m_grid)->capture_default_str();
  games_cmd->add_option("--T-grid", dg_cfg.t_grid)->capture_default_str();
  games_cmd->add_option("--beta", dg_cfg.beta)->capture_default_str();
  games_cmd->add_option("--eta", dg_cfg.eta)->capture_default_str();
  games_cmd->add_option("--game-seeds", dg_cfg.seeds, "Replications")->capture_default_str();
  games_cmd->add_option("--coverage", dg_cfg.impossibility_c)->capture_default_str();
  games_cmd->add_option("--mesh", dg_cfg.mesh)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (inst_cmd->parsed())
      return run_instance(inst_kind, inst_n, inst_zeta, inst_cap, seed, inst_contexts,
                          inst_actions, inst_r_max, out_dir);
    if (sweep_cmd->parsed()) {
      sweep_cfg.master_seed = seed;
      sweep_cfg.out_dir = out_dir;
      sweep_cfg.format = format;
      sweep_cfg.jobs = jobs;
      sweep_cfg.validate();
      return run_sweep(sweep_cfg);
    }
    if (actions_cmd->parsed()) {
      // default grid spans the regime where the pessimism cap is active,
      // up to the overoptimization threshold 1/(2 log n)
      if (actions_betas.empty()) {
        const double lo = 0.05, hi = 1.0 / (2.0 * std::log(static_cast<double>(actions_n)));
        for (int i = 0; i < 12; ++i) actions_betas.push_back(lo * std::pow(hi / lo, i / 11.0));
      }
      return run_actions(actions_n, actions_betas, seed, out_dir, format);
    }
    if (links_cmd->parsed()) return run_links(y_min, y_max, y_step, out_dir, format);
    if (games_cmd->parsed()) {
      dg_cfg.master_seed = seed;
      dg_cfg.jobs = jobs;
      return run_games(dg_cfg, out_dir, format);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
