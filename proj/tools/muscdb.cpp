#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "muscdb/errors.hpp"
#include "muscdb/harness.hpp"
#include "muscdb/ingest.hpp"
#include "muscdb/synthgen.hpp"

namespace fs = std::filesystem;
using namespace muscdb;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::vector<std::string> class_list(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? standard_benchmark() : load_config(path);
}

std::string reports_path(const std::string& arg) {
  fs::path p(arg);
  return fs::is_directory(p) ? (p / "reports.csv").string() : arg;
}

int validate_files(const std::string& kind, const std::vector<std::string>& files, const std::string& classes_path) {
  std::vector<std::string> classes;
  if (!classes_path.empty()) classes = class_list(classes_path);
  int status = 0;
  for (const auto& file : files) {
    try {
      std::size_t records = 0;
      if (kind == "config") {
        load_config(file);
        records = 1;
      } else {
        InputKind k;
        if (kind == "dota") k = InputKind::dota;
        else if (kind == "predictions") k = InputKind::predictions;
        else if (kind == "queries") k = InputKind::query_results;
        else if (kind == "features") k = InputKind::features;
        else k = InputKind::reports;
        records = validate_text(k, read_file(file), classes);
      }
      std::cout << file << ": ok (" << records << " records)\n";
    } catch (const Error& e) {
      std::cerr << file << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
      status = kExitData;
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-level active learning for oriented object detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;

  auto* generate = app.add_subcommand("generate", "Write a synthetic pool to disk");
  std::uint64_t gen_seed = 0;
  generate->add_option("--config", config_path, "Experiment configuration (JSON)");
  generate->add_option("--seed", gen_seed, "Generator seed");
  generate->add_option("--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run an active learning experiment");
  bool resume = false;
  int stop_after = 0;
  std::string strategy;
  run->add_option("--config", config_path, "Experiment configuration (JSON)");
  run->add_option("--seed", seeds, "Seeds to run (overrides the configuration)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--strategy", strategy, "Strategy (overrides the configuration)");
  run->add_flag("--resume", resume, "Continue from existing checkpoints");
  run->add_option("--stop-after", stop_after, "Stop after this many cycles")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Score-threshold sensitivity study");
  std::vector<double> thetas{0.05, 0.10, 0.15};
  sweep->add_option("--config", config_path, "Experiment configuration (JSON)");
  sweep->add_option("--seed", seeds, "Seeds to run (overrides the configuration)");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--thetas", thetas, "Threshold grid")->delimiter(',');

  auto* compare = app.add_subcommand("compare", "Summarise reports of several strategies");
  std::vector<std::string> inputs;
  std::string compare_out;
  compare->add_option("inputs", inputs, "Strategy output directories or reports.csv files")->required();
  compare->add_option("--out", compare_out, "Write the table here instead of stdout");

  auto* validate = app.add_subcommand("validate", "Check input files");
  std::string kind = "dota";
  std::vector<std::string> files;
  std::string classes_path;
  validate->add_option("--kind", kind, "Input kind")
      ->check(CLI::IsMember({"dota", "predictions", "queries", "features", "reports", "config"}));
  validate->add_option("--classes", classes_path, "Class list for DOTA files");
  validate->add_option("files", files, "Files to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate) {
      ExperimentConfig config = config_or_default(config_path);
      if (config.source.kind != PoolSource::Kind::synthetic) {
        std::cerr << "generate needs a synthetic source\n";
        return kExitUsage;
      }
      GenConfig gen = config.source.generator;
      gen.seed = gen_seed;
      export_world(gen_pool(gen), gen, out_dir);
      return 0;
    }
    if (*run) {
      ExperimentConfig config = config_or_default(config_path);
      if (!seeds.empty()) config.seeds = seeds;
      if (!strategy.empty()) config.strategy = strategy_from_string(strategy);
      RunOptions options;
      options.output_dir = out_dir.empty() ? config.output_dir : out_dir;
      options.resume = resume;
      if (stop_after > 0) options.stop_after = stop_after;
      const ExperimentResult result = run_experiment(config, options);
      if (options.output_dir.empty()) std::cout << write_cycle_reports(result.all_reports());
      return 0;
    }
    if (*sweep) {
      ExperimentConfig config = config_or_default(config_path);
      if (!seeds.empty()) config.seeds = seeds;
      RunOptions options;
      options.output_dir = out_dir.empty() ? config.output_dir : out_dir;
      const SweepResult result = theta_sweep(config, thetas, options);
      const std::string table = write_sweep_table(result.rows);
      if (!options.output_dir.empty()) write_file((fs::path(options.output_dir) / "sweep.csv").string(), table);
      std::cout << table;
      return 0;
    }
    if (*compare) {
      std::vector<std::vector<CycleReport>> groups;
      for (const auto& in : inputs) groups.push_back(read_cycle_reports(read_file(reports_path(in))));
      const std::string table = write_compare_table(compare_reports(groups));
      if (compare_out.empty()) {
        std::cout << table;
      } else {
        write_file(compare_out, table);
      }
      return 0;
    }
    if (*validate) return validate_files(kind, files, classes_path);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::config ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
