// parbayes: simulate | run | bench | report | verify

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parbayes/bench.hpp"
#include "parbayes/io.hpp"
#include "parbayes/pkf.hpp"
#include "parbayes/prts.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/verify.hpp"

namespace fs = std::filesystem;
using namespace parbayes;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A path ending in `ext` names the file itself; anything else is a directory.
fs::path output_file(const fs::path& out, const std::string& ext, const std::string& default_name) {
  fs::path target = out.extension() == ext ? out : out / default_name;
  const fs::path dir = target.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
  return target;
}

struct Options {
  std::string model = "tracking";
  std::vector<std::size_t> ns;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> blocks{1};
  unsigned threads = 1;
  std::string out = ".";
  std::string data;
  std::string algorithm;
  std::string csv;
};

void cmd_simulate(const Options& o) {
  if (o.ns.size() != 1) throw UsageError("simulate: give exactly one --n");
  if (o.ns.front() < 1) throw UsageError("simulate: --n must be at least 1");
  if (o.seeds.size() != 1) throw UsageError("simulate: give exactly one --seed");
  RunConfig config;
  config.model = o.model;
  const LGSSM model = model_for(config, o.ns.front());
  const DataFile data{model, simulate(model, o.seeds.front())};
  const fs::path path = output_file(o.out, ".json", "data.json");
  write_data_file(path, data);
  std::cout << "wrote " << path.string() << " (" << model.n << " steps)\n";
}

void cmd_run(const Options& o) {
  if (o.data.empty()) throw UsageError("run: --data is required");
  if (o.blocks.size() != 1) throw UsageError("run: give exactly one --block");
  DataFile data = read_data_file(o.data);
  if (o.model != "tracking") {
    const LGSSM model = read_model_file(o.model);
    if (model.state_dim() != data.model.state_dim() || model.meas_dim() != data.model.meas_dim())
      throw std::invalid_argument("model '" + o.model + "' has dimensions (" + std::to_string(model.state_dim()) +
                                  ", " + std::to_string(model.meas_dim()) + ") but data '" + o.data + "' has (" +
                                  std::to_string(data.model.state_dim()) + ", " +
                                  std::to_string(data.model.meas_dim()) + ")");
    if (!model.stationary() && model.n != data.model.n)
      throw std::invalid_argument("model '" + o.model + "' has n=" + std::to_string(model.n) + " but data has " +
                                  std::to_string(data.model.n) + " measurements");
    const std::size_t n = data.model.n;
    data.model = model;
    data.model.n = n;
  }
  const LGSSM& model = data.model;
  const auto& ys = data.sim.measurements;
  const std::size_t block = o.blocks.front();
  const Executor exec(o.threads);
  FlopLedger ledger;
  std::string csv;
  if (o.algorithm == "kf") {
    const FilterRun run = kalman_filter(model, ys, ledger);
    csv = moments_csv(run.filtered, &run.log_densities, &run.log_prefix);
  } else if (o.algorithm == "pkf") {
    const auto pf = parallel_filter(model, ys, block, exec);
    const auto ll = parallel_loglik(model, pf.filtered, ys, exec);
    csv = moments_csv(pf.filtered, &ll.log_densities, &ll.log_prefix);
  } else if (o.algorithm == "rts") {
    const FilterRun run = kalman_filter(model, ys, ledger);
    csv = moments_csv(rts_smoother(model, run, ledger));
  } else if (o.algorithm == "prts") {
    const auto pf = parallel_filter(model, ys, block, exec);
    csv = moments_csv(parallel_smoother(model, pf.filtered, block, exec).smoothed);
  } else {
    throw UsageError("run: --algorithm must be one of kf, pkf, rts, prts");
  }
  const fs::path path = output_file(o.out, ".csv", o.algorithm + ".csv");
  write_text(path, csv);
  std::cout << "wrote " << path.string() << "\n";
}

void cmd_bench(const Options& o) {
  RunConfig config;
  config.model = o.model;
  config.ns = o.ns.empty() ? default_sweep() : o.ns;
  config.seeds = o.seeds;
  config.blocks = o.blocks;
  config.threads = o.threads;
  config.out_dir = o.out;
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto records = run_bench(config);
  const fs::path path = output_file(o.out, ".csv", "bench.csv");
  write_text(path, bench_csv(records));
  std::cout << "wrote " << path.string() << " (" << records.size() << " records)\n";
}

void cmd_report(const Options& o) {
  const fs::path csv = o.csv.empty() ? fs::path(o.out) / "bench.csv" : fs::path(o.csv);
  const auto records = parse_bench_csv(read_text(csv));
  const BenchSummary s = write_report(records, o.out);
  std::cout << to_json(s).dump(2) << "\n";
}

int cmd_verify(const Options& o) {
  bool all = true;
  for (const auto& check : verify::acceptance_checks(Executor(o.threads))) {
    const auto r = check();
    all = all && r.passed;
    std::cout << verify::format(r) << std::endl;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel Bayesian filtering and smoothing via associative scans"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", o.model, "'tracking' or a JSON model/data file");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory (or file)");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate a trajectory and write a JSON data file");
  common(simulate_cmd);
  simulate_cmd->add_option("--n", o.ns, "number of steps")->required()->delimiter(',');
  simulate_cmd->add_option("--seed", o.seeds, "random seed")->delimiter(',');

  auto* run_cmd = app.add_subcommand("run", "run one algorithm on a data file and write per-step CSV");
  common(run_cmd);
  run_cmd->add_option("--data", o.data, "JSON data file")->required();
  run_cmd->add_option("--algorithm", o.algorithm, "kf | pkf | rts | prts")->required();
  run_cmd->add_option("--block", o.blocks, "block length for the parallel scan")->delimiter(',');

  auto* bench_cmd = app.add_subcommand("bench", "sweep n and record work/span flops as CSV");
  common(bench_cmd);
  bench_cmd->add_option("--n", o.ns, "comma-separated step counts (default 16..16384)")->delimiter(',');
  bench_cmd->add_option("--seed", o.seeds, "comma-separated seeds")->delimiter(',');
  bench_cmd->add_option("--block", o.blocks, "comma-separated block lengths")->delimiter(',');

  auto* report_cmd = app.add_subcommand("report", "render SVG plots and summary JSON from a bench CSV");
  common(report_cmd);
  report_cmd->add_option("--csv", o.csv, "bench CSV (default <out>/bench.csv)");

  auto* verify_cmd = app.add_subcommand("verify", "run all oracle and property checks");
  common(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate_cmd) cmd_simulate(o);
    if (*run_cmd) cmd_run(o);
    if (*bench_cmd) cmd_bench(o);
    if (*report_cmd) cmd_report(o);
    if (*verify_cmd) return cmd_verify(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
