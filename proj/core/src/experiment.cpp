#include "drivelab/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drivelab/codebook_io.hpp"
#include "drivelab/error.hpp"
#include "drivelab/policy_io.hpp"
#include "drivelab/rng.hpp"
#include "drivelab/scenario_io.hpp"

namespace drivelab {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ParseError(std::string("unknown key '") + k + "' in " + where);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("invalid config: ") + what);
  };
  require(vocabulary >= 1 && vocabulary <= kMaxVocabulary, "vocabulary must be in [1, 2048]");
  require(corpus_size >= 1, "corpus_size must be positive");
  require(per_stratum >= 1, "per_stratum must be positive");
  require(!sft.strata.empty(), "sft.strata must not be empty");
  require(sft.batch_size >= 1 && sft.hidden >= 1, "sft batch and hidden must be positive");
  require(sft.lr > 0.0 && rl.lr > 0.0, "learning rates must be positive");
  require(rl.group_size >= 2, "group_size must be at least 2");
  require(rl.temperature > 0.0 && rl.eval_temperature > 0.0, "temperatures must be positive");
  require(rl.batch_scenarios >= 1, "batch_scenarios must be positive");
  require(rl.max_grad_norm >= 0.0, "max_grad_norm must be non-negative");
  require(!output_dir.empty(), "output_dir must be set");
  ClipConfig{rl.eps_low, rl.eps_high}.validate();
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.algo = rl.algo;
  t.steps = rl.steps;
  t.lr = rl.lr;
  t.clip = {rl.eps_low, rl.eps_high};
  t.group_size = rl.group_size;
  t.temperature = rl.temperature;
  t.batch_scenarios = rl.batch_scenarios;
  t.max_grad_norm = rl.max_grad_norm;
  t.seed = derive_seed(seed, {0x726c});
  return t;
}

std::string config_to_json(const ExperimentConfig& c) {
  json strata = json::array();
  for (Difficulty d : c.sft.strata) strata.push_back(std::string(to_string(d)));
  json j;
  j["schema"] = kExperimentSchema;
  j["seed"] = c.seed;
  j["vocabulary"] = c.vocabulary;
  j["corpus_size"] = c.corpus_size;
  j["kmeans_iters"] = c.kmeans_iters;
  j["codebook"] = c.codebook_path;
  j["per_stratum"] = c.per_stratum;
  j["style"] = std::string(to_string(c.style));
  j["sft"] = {{"demos_per_stratum", c.sft.demos_per_stratum},
              {"strata", strata},
              {"steps", c.sft.steps},
              {"lr", c.sft.lr},
              {"batch_size", c.sft.batch_size},
              {"cosine_decay", c.sft.cosine_decay},
              {"hidden", c.sft.hidden}};
  j["rl"] = {{"algo", std::string(to_string(c.rl.algo))},
             {"group_size", c.rl.group_size},
             {"temperature", c.rl.temperature},
             {"eval_temperature", c.rl.eval_temperature},
             {"steps", c.rl.steps},
             {"lr", c.rl.lr},
             {"eps_low", c.rl.eps_low},
             {"eps_high", c.rl.eps_high},
             {"batch_scenarios", c.rl.batch_scenarios},
             {"max_grad_norm", c.rl.max_grad_norm}};
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    if (j.value("schema", std::string{}) != kExperimentSchema) {
      throw ParseError(std::string("config schema must be ") + kExperimentSchema);
    }
    reject_unknown(j, {"schema", "seed", "vocabulary", "corpus_size", "kmeans_iters", "codebook",
                       "per_stratum", "style", "sft", "rl", "output_dir"},
                   "config");
    take(j, "seed", c.seed);
    take(j, "vocabulary", c.vocabulary);
    take(j, "corpus_size", c.corpus_size);
    take(j, "kmeans_iters", c.kmeans_iters);
    take(j, "codebook", c.codebook_path);
    take(j, "per_stratum", c.per_stratum);
    take(j, "output_dir", c.output_dir);
    if (j.contains("style")) c.style = parse_style(j.at("style").get<std::string>());
    if (j.contains("sft")) {
      const json& s = j.at("sft");
      reject_unknown(s, {"demos_per_stratum", "strata", "steps", "lr", "batch_size", "cosine_decay", "hidden"}, "sft");
      take(s, "demos_per_stratum", c.sft.demos_per_stratum);
      take(s, "steps", c.sft.steps);
      take(s, "lr", c.sft.lr);
      take(s, "batch_size", c.sft.batch_size);
      take(s, "cosine_decay", c.sft.cosine_decay);
      take(s, "hidden", c.sft.hidden);
      if (s.contains("strata")) {
        c.sft.strata.clear();
        for (const auto& d : s.at("strata")) c.sft.strata.push_back(parse_difficulty(d.get<std::string>()));
      }
    }
    if (j.contains("rl")) {
      const json& r = j.at("rl");
      reject_unknown(r, {"algo", "group_size", "temperature", "eval_temperature", "steps", "lr",
                         "eps_low", "eps_high", "batch_scenarios", "max_grad_norm"},
                     "rl");
      if (r.contains("algo")) c.rl.algo = parse_algorithm(r.at("algo").get<std::string>());
      take(r, "group_size", c.rl.group_size);
      take(r, "temperature", c.rl.temperature);
      take(r, "eval_temperature", c.rl.eval_temperature);
      take(r, "steps", c.rl.steps);
      take(r, "lr", c.rl.lr);
      take(r, "eps_low", c.rl.eps_low);
      take(r, "eps_high", c.rl.eps_high);
      take(r, "batch_scenarios", c.rl.batch_scenarios);
      take(r, "max_grad_norm", c.rl.max_grad_norm);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

void save_config(const std::string& path, const ExperimentConfig& config) {
  write_file(path, config_to_json(config));
}

ReconstructionSummary reconstruction_error(std::span<const Trajectory> corpus, const Codebook& codebook) {
  ReconstructionSummary r;
  std::size_t points = 0;
  for (const Trajectory& t : corpus) {
    const Trajectory rec = decode(encode(t, codebook), codebook, t.waypoints.front());
    for (std::size_t k = 0; k < t.size(); ++k) {
      r.mean_displacement += std::hypot(rec[k].x - t[k].x, rec[k].y - t[k].y);
    }
    points += t.size();
    const double end = std::hypot(rec.waypoints.back().x - t.waypoints.back().x,
                                  rec.waypoints.back().y - t.waypoints.back().y);
    r.mean_endpoint_error += end;
    r.max_endpoint_error = std::max(r.max_endpoint_error, end);
    ++r.trajectories;
  }
  if (r.trajectories) r.mean_endpoint_error /= static_cast<double>(r.trajectories);
  if (points) r.mean_displacement /= static_cast<double>(points);
  return r;
}

TokenizerReport fit_tokenizer(const ExperimentConfig& config) {
  const double horizon = config.style == ScenarioStyle::navsim ? 4.0 : 5.0;
  const std::vector<Trajectory> corpus =
      synthetic_corpus(derive_seed(config.seed, {0x636f7270}), config.corpus_size, horizon);
  std::vector<Segment> segments;
  for (const Trajectory& t : corpus) {
    for (const Segment& s : segment(t)) segments.push_back(canonicalize(s));
  }
  CodebookFit fit = fit_codebook_traced(segments, config.vocabulary,
                                        derive_seed(config.seed, {0x6b6d}), config.kmeans_iters);
  TokenizerReport report{std::move(fit.codebook), segments.size(), fit.iterations,
                         fit.objective.empty() ? 0.0 : fit.objective.back(), {}};
  report.reconstruction = reconstruction_error(corpus, report.codebook);
  return report;
}

std::string to_string(const TokenizerReport& r) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "codebook K=" << r.codebook.size() << " from " << r.segments << " segments, "
      << r.iterations << " iterations, objective " << r.objective << '\n';
  out << "reconstruction over " << r.reconstruction.trajectories
      << " trajectories: mean endpoint error " << r.reconstruction.mean_endpoint_error
      << " m, max " << r.reconstruction.max_endpoint_error << " m, mean displacement "
      << r.reconstruction.mean_displacement << " m\n";
  return out.str();
}

TokenizerReport cmd_fit_tokenizer(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  TokenizerReport report = fit_tokenizer(config);
  fs::create_directories(config.output_dir);
  save_codebook((fs::path(config.output_dir) / "codebook.txt").string(), report.codebook);
  log << to_string(report);
  return report;
}

std::string summary_to_text(const RunSummaryFile& s) {
  std::ostringstream out;
  out << "algo: " << s.algo << '\n'
      << "seed: " << s.seed << '\n'
      << "scenario_digest: " << s.scenario_digest << '\n'
      << "scenarios: " << s.scenarios << '\n'
      << "steps: " << s.steps << '\n'
      << "initial_mean_reward: " << fmt(s.initial_mean_reward) << '\n'
      << "final_mean_reward: " << fmt(s.final_mean_reward) << '\n'
      << "relative_gain: " << fmt(s.relative_gain) << '\n'
      << "rollout_initial: " << fmt(s.rollout_initial) << '\n'
      << "rollout_final: " << fmt(s.rollout_final) << '\n'
      << "tertile_low_delta: " << fmt(s.tertile_low) << '\n'
      << "tertile_mid_delta: " << fmt(s.tertile_mid) << '\n'
      << "tertile_high_delta: " << fmt(s.tertile_high) << '\n'
      << "polarization: " << s.polarization << '\n';
  return out.str();
}

RunSummaryFile summary_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    kv[line.substr(0, colon)] = line.substr(colon + 2);
  }
  auto get = [&kv](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("summary is missing ") + key);
    return it->second;
  };
  RunSummaryFile s;
  try {
    s.algo = get("algo");
    s.seed = std::stoull(get("seed"));
    s.scenario_digest = get("scenario_digest");
    s.scenarios = std::stoull(get("scenarios"));
    s.steps = std::stoull(get("steps"));
    s.initial_mean_reward = std::stod(get("initial_mean_reward"));
    s.final_mean_reward = std::stod(get("final_mean_reward"));
    s.relative_gain = std::stod(get("relative_gain"));
    s.rollout_initial = std::stod(get("rollout_initial"));
    s.rollout_final = std::stod(get("rollout_final"));
    s.tertile_low = std::stod(get("tertile_low_delta"));
    s.tertile_mid = std::stod(get("tertile_mid_delta"));
    s.tertile_high = std::stod(get("tertile_high_delta"));
    s.polarization = get("polarization");
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("summary: bad number: ") + e.what());
  }
  return s;
}

namespace {

std::vector<Demonstration> sft_demonstrations(const ExperimentConfig& c, const Codebook& codebook) {
  const std::vector<Scenario> pool =
      generate_scenario_set(derive_seed(c.seed, {0x736674}), c.sft.demos_per_stratum, c.style);
  std::vector<Demonstration> demos;
  for (const Scenario& sc : pool) {
    if (std::find(c.sft.strata.begin(), c.sft.strata.end(), sc.difficulty) != c.sft.strata.end()) {
      demos.push_back(make_demonstration(sc, codebook));
    }
  }
  return demos;
}

std::vector<GroupStat> eval_stats(const PolicyParams& p, std::span<const Scenario> scenarios,
                                  const ExperimentConfig& c, const RolloutEnv& env,
                                  const WorkerPool& pool, std::size_t step) {
  return collect_stats(p, scenarios, c.rl.group_size, c.rl.eval_temperature,
                       derive_seed(c.seed, {0x6576616c}), env, pool, step);
}

}  // namespace

RunOutputs run_experiment(const ExperimentConfig& config, const Codebook& codebook,
                          const WorkerPool& pool, std::ostream* log) {
  config.validate();
  if (codebook.size() != config.vocabulary) {
    throw ContractError("codebook size does not match the configured vocabulary");
  }
  const std::vector<Scenario> scenarios = generate_scenario_set(config.seed, config.per_stratum, config.style);
  const RolloutEnv env{&codebook, {}, {}};

  const std::vector<Demonstration> demos = sft_demonstrations(config, codebook);
  PolicyParams p0 = init_policy(static_cast<Eigen::Index>(codebook.size()), config.sft.hidden,
                                kFeatureDim, derive_seed(config.seed, {0x696e6974}));
  const SftResult sft = sft_fit_traced(std::move(p0), demos,
                                       {config.sft.steps, config.sft.lr, config.sft.batch_size,
                                        derive_seed(config.seed, {0x736674, 1}), config.sft.cosine_decay});
  if (log) {
    *log << "sft: " << demos.size() << " demos, " << config.sft.steps << " steps, loss "
         << (sft.loss.empty() ? 0.0 : sft.loss.front()) << " -> "
         << (sft.loss.empty() ? 0.0 : sft.loss.back()) << '\n';
  }

  const std::uint64_t stats_seed = derive_seed(config.seed, {0x7374});
  RunOutputs out;
  out.initial = collect_stats(sft.params, scenarios, config.rl.group_size, config.rl.temperature,
                              stats_seed, env, pool, 0);
  out.polarization = polarization_check(bin_profile(out.initial));

  const TrainConfig tc = config.train_config();
  StepCallback progress;
  if (log) {
    progress = [log, &tc](const TrainStep& s) {
      if ((s.step + 1) % 10 == 0 || s.step + 1 == tc.steps) {
        *log << to_string(tc.algo) << " step " << s.step + 1 << "/" << tc.steps << " mean r_total "
             << s.mean_reward << " grad norm " << s.grad_norm << '\n';
      }
    };
  }
  TrainResult trained = train(sft.params, scenarios, tc, env, pool, progress);
  out.history = std::move(trained.history);
  out.sft_policy = sft.params;
  out.final_policy = trained.params;
  out.final = collect_stats(trained.params, scenarios, config.rl.group_size, config.rl.temperature,
                            stats_seed, env, pool, config.rl.steps);
  out.tertiles = tertile_report(out.initial, out.final);

  RunSummaryFile& s = out.summary;
  s.algo = std::string(to_string(config.rl.algo));
  s.seed = config.seed;
  s.scenario_digest = digest(scenarios_to_json(scenarios));
  s.scenarios = scenarios.size();
  s.steps = config.rl.steps;
  out.eval_initial = eval_stats(sft.params, scenarios, config, env, pool, 0);
  out.eval_final = eval_stats(trained.params, scenarios, config, env, pool, config.rl.steps);
  const RunSummary row{s.algo, mean_group_mean(out.eval_initial), mean_group_mean(out.eval_final)};
  s.initial_mean_reward = row.initial;
  s.final_mean_reward = row.final;
  s.relative_gain = row.gain();
  s.rollout_initial = mean_group_mean(out.initial);
  s.rollout_final = mean_group_mean(out.final);
  s.tertile_low = out.tertiles[0].delta;
  s.tertile_mid = out.tertiles[1].delta;
  s.tertile_high = out.tertiles[2].delta;
  s.polarization = std::string(to_string(out.polarization.verdict));
  return out;
}

RunOutputs cmd_run(const ExperimentConfig& config, std::size_t workers, std::ostream& log) {
  config.validate();
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  save_config((dir / "config.json").string(), config);

  std::optional<Codebook> codebook;
  if (config.codebook_path.empty()) {
    TokenizerReport report = fit_tokenizer(config);
    log << to_string(report);
    codebook.emplace(std::move(report.codebook));
  } else {
    codebook.emplace(load_codebook(config.codebook_path));
  }
  save_codebook((dir / "codebook.txt").string(), *codebook);

  const std::vector<Scenario> scenarios = generate_scenario_set(config.seed, config.per_stratum, config.style);
  save_scenarios((dir / "scenarios.json").string(), scenarios);

  const WorkerPool pool(workers);
  RunOutputs out = run_experiment(config, *codebook, pool, &log);

  save_policy((dir / "sft_policy.txt").string(), out.sft_policy);
  save_policy((dir / "final_policy.txt").string(), out.final_policy);

  std::vector<GroupStat> all = out.initial;
  all.insert(all.end(), out.final.begin(), out.final.end());
  write_file(dir / "bins.csv", bins_csv(bin_profile(out.initial)));
  write_file(dir / "bins_final.csv", bins_csv(bin_profile(out.final)));
  write_file(dir / "history.csv", history_csv(out.history));
  write_file(dir / "tertiles.csv", tertiles_csv(out.tertiles));
  write_file(dir / "stats.csv", stats_csv(all));
  std::vector<GroupStat> evals = out.eval_initial;
  evals.insert(evals.end(), out.eval_final.begin(), out.eval_final.end());
  write_file(dir / "eval.csv", stats_csv(evals));
  const ComparisonReport report = comparison_report(
      {{out.summary.algo, out.summary.initial_mean_reward, out.summary.final_mean_reward}});
  write_file(dir / "comparison.csv", report.csv());
  write_file(dir / "summary.txt", summary_to_text(out.summary));

  log << "polarization: " << out.polarization.report << '\n' << report.table();
  return out;
}

ComparisonReport cmd_compare(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2) throw ContractError("compare needs at least two run directories");
  std::vector<RunSummaryFile> runs;
  for (const std::string& d : run_dirs) runs.push_back(summary_from_text(read_file(fs::path(d) / "summary.txt")));
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].seed != runs[0].seed) {
      throw ContractError("seed mismatch: " + run_dirs[0] + " uses " + std::to_string(runs[0].seed) +
                          ", " + run_dirs[i] + " uses " + std::to_string(runs[i].seed));
    }
    if (runs[i].scenario_digest != runs[0].scenario_digest) {
      throw ContractError("scenario sets differ between " + run_dirs[0] + " and " + run_dirs[i]);
    }
  }
  std::vector<RunSummary> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    rows.push_back({runs[i].algo, runs[i].initial_mean_reward, runs[i].final_mean_reward});
  }
  return comparison_report(std::move(rows));
}

std::vector<GroupStat> read_stats_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "step,scenario_id,group_mean,group_std,total_mean") {
    throw ParseError("stats.csv: unexpected header");
  }
  std::vector<GroupStat> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[5];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw ParseError("stats.csv: short row: " + line);
    }
    try {
      out.push_back({std::stoull(cell[1]), std::stod(cell[2]), std::stod(cell[3]), std::stod(cell[4]),
                     std::stoull(cell[0])});
    } catch (const std::logic_error&) {
      throw ParseError("stats.csv: bad number in row: " + line);
    }
  }
  return out;
}

std::string cmd_stats(const std::string& run_dir, std::size_t bins) {
  const std::vector<GroupStat> all = read_stats_csv(read_file(fs::path(run_dir) / "stats.csv"));
  if (all.empty()) throw ParseError("stats.csv has no rows");
  std::size_t last = 0;
  for (const GroupStat& s : all) last = std::max(last, s.step);
  std::vector<GroupStat> first, final;
  for (const GroupStat& s : all) (s.step == 0 ? first : final).push_back(s);
  if (last == 0) {
    // A zero-step run records the same stats twice.
    final.assign(first.begin() + static_cast<std::ptrdiff_t>(first.size() / 2), first.end());
    first.resize(first.size() / 2);
  }
  std::ostringstream out;
  const BinProfile profile = bin_profile(first, bins);
  out << "initial profile (" << first.size() << " groups)\n" << bins_csv(profile);
  out << "polarization: " << polarization_check(profile).report << '\n';
  out << "mean reward " << std::setprecision(6) << mean_group_mean(first) << " -> "
      << mean_group_mean(final) << '\n';
  out << tertiles_csv(tertile_report(first, final));
  return out.str();
}

std::string digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace drivelab
