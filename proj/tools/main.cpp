// drivelab: codebook fitting, RL fine-tuning runs and their reports.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drivelab/error.hpp"
#include "drivelab/experiment.hpp"

namespace {

using drivelab::ExperimentConfig;

// Flags mirror the config file; anything given on the command line
// overrides the file.
struct Flags {
  std::string config_path;
  std::string algo;
  std::string style;
  std::string codebook;
  std::string output;
  std::uint64_t seed = 0;
  std::size_t vocabulary = 0;
  std::size_t corpus = 0;
  std::size_t per_stratum = 0;
  std::size_t steps = 0;
  std::size_t sft_steps = 0;
  std::size_t group_size = 0;
  std::size_t batch = 0;
  double lr = 0.0;
  double sft_lr = 0.0;
  double temperature = 0.0;
  double max_grad_norm = 0.0;
};

void add_config_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Experiment seed");
  cmd->add_option("-k,--vocabulary", f.vocabulary, "Codebook size K")->check(CLI::Range(1, 2048));
  cmd->add_option("--corpus", f.corpus, "Synthetic corpus size for codebook fitting");
  cmd->add_option("--style", f.style, "Scenario style")->check(CLI::IsMember({"navsim", "waymo"}));
  cmd->add_option("-o,--output", f.output, "Output directory");
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--algo", f.algo, "RL algorithm")->check(CLI::IsMember({"grpo", "drgrpo"}));
  cmd->add_option("--codebook", f.codebook, "Existing codebook file (default: fit inline)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--per-stratum", f.per_stratum, "Scenarios per difficulty stratum");
  cmd->add_option("--steps", f.steps, "RL steps");
  cmd->add_option("--sft-steps", f.sft_steps, "SFT steps");
  cmd->add_option("--group-size", f.group_size, "Rollouts per scenario");
  cmd->add_option("--batch", f.batch, "Scenarios per RL step");
  cmd->add_option("--lr", f.lr, "RL learning rate");
  cmd->add_option("--sft-lr", f.sft_lr, "SFT learning rate");
  cmd->add_option("--temperature", f.temperature, "Rollout temperature");
  cmd->add_option("--max-grad-norm", f.max_grad_norm, "RL gradient clip (0: off)");
}

ExperimentConfig resolve(const Flags& f, const CLI::App* cmd) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : drivelab::load_config(f.config_path);
  auto given = [cmd](const char* name) { return cmd->count(name) > 0; };
  if (given("--seed")) c.seed = f.seed;
  if (given("--vocabulary")) c.vocabulary = f.vocabulary;
  if (given("--corpus")) c.corpus_size = f.corpus;
  if (given("--style")) c.style = drivelab::parse_style(f.style);
  if (given("--output")) c.output_dir = f.output;
  if (cmd->get_option_no_throw("--algo")) {
    if (given("--algo")) c.rl.algo = drivelab::parse_algorithm(f.algo);
    if (given("--codebook")) c.codebook_path = f.codebook;
    if (given("--per-stratum")) c.per_stratum = f.per_stratum;
    if (given("--steps")) c.rl.steps = f.steps;
    if (given("--sft-steps")) c.sft.steps = f.sft_steps;
    if (given("--group-size")) c.rl.group_size = f.group_size;
    if (given("--batch")) c.rl.batch_scenarios = f.batch;
    if (given("--lr")) c.rl.lr = f.lr;
    if (given("--sft-lr")) c.sft.lr = f.sft_lr;
    if (given("--temperature")) c.rl.temperature = f.temperature;
    if (given("--max-grad-norm")) c.rl.max_grad_norm = f.max_grad_norm;
  }
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-token RL fine-tuning experiments"};
  app.require_subcommand(1);

  Flags fit_flags;
  CLI::App* fit = app.add_subcommand("fit-tokenizer", "Fit a trajectory codebook and write codebook.txt");
  add_config_flags(fit, fit_flags);

  Flags run_flags;
  std::size_t workers = 0;
  CLI::App* run = app.add_subcommand("run", "SFT, RL fine-tuning and reports into one run directory");
  add_config_flags(run, run_flags);
  add_run_flags(run, run_flags);
  run->add_option("-j,--workers", workers, "Worker threads (0: all cores)");

  std::vector<std::string> compare_dirs;
  CLI::App* compare = app.add_subcommand("compare", "Join completed runs into one table");
  compare->add_option("runs", compare_dirs, "Run directories")->required()->expected(2, -1);
  bool compare_csv = false;
  compare->add_flag("--csv", compare_csv, "Emit CSV instead of a table");

  std::string stats_dir;
  std::size_t bins = 20;
  CLI::App* stats = app.add_subcommand("stats", "Reward-landscape diagnostics for a run directory");
  stats->add_option("run", stats_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  stats->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit) {
      drivelab::cmd_fit_tokenizer(resolve(fit_flags, fit), std::cout);
    } else if (*run) {
      const ExperimentConfig c = resolve(run_flags, run);
      drivelab::cmd_run(c, workers, std::cout);
      std::cout << "wrote " << c.output_dir << '\n';
    } else if (*compare) {
      const auto report = drivelab::cmd_compare(compare_dirs);
      std::cout << (compare_csv ? report.csv() : report.table());
    } else if (*stats) {
      std::cout << drivelab::cmd_stats(stats_dir, bins);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
