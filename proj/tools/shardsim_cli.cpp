//------------------------------------------------------------------------------
//
//   Copyright 2026 the shardsim authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "shardsim/assignment.hpp"
#include "shardsim/scenario.hpp"

namespace {

using namespace shardsim;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int cmd_init(const std::string& path) {
  scenario::ScenarioConfig cfg;
  write_file(path, scenario::to_json(cfg) + "\n");
  std::cout << "wrote default config to " << path << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  auto cfg = scenario::config_from_json(read_file(config_path));
  auto violations = scenario::validate_config(cfg);
  if (violations.empty()) {
    std::cout << "ok\n";
    return 0;
  }
  for (const auto& v : violations)
    std::cout << "violation " << v.rule << ": " << v.detail << "\n";
  return 1;
}

int cmd_enumerate(bool bft_only, const std::string& message, bool list) {
  scenario::EnumerationFilter filter;
  filter.bft_only = bft_only;
  if (!message.empty()) filter.message_model = message;
  auto combos = scenario::enumerate_combinations(filter);
  std::cout << combos.size() << "\n";
  if (list)
    for (const auto& c : combos) std::cout << c.label() << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override,
            const std::string& out_dir) {
  auto cfg = scenario::config_from_json(read_file(config_path));
  if (seed_override != 0) cfg.seed = seed_override;
  auto result = scenario::run_scenario(cfg);
  std::cout << result.report.render();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/report.txt", result.report.render());
    write_file(out_dir + "/summary.csv", scenario::MetricsReport::csv_header() +
                                             "\n" + result.report.csv_row() +
                                             "\n");
    std::string events;
    for (const auto& e : result.report.events) events += e + "\n";
    write_file(out_dir + "/events.jsonl", events);
    if (!result.ok)
      write_file(out_dir + "/reproducer.json", result.reproducer_json + "\n");
  }
  if (!result.ok) {
    std::cerr << "run failed: " << result.failure << "\n";
    return 2;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_csv, const std::string& out_file) {
  auto cfg = scenario::config_from_json(read_file(config_path));
  std::vector<std::string> values;
  std::string current;
  for (char c : values_csv) {
    if (c == ',') {
      if (!current.empty()) values.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) values.push_back(current);

  auto cells = scenario::sweep(cfg, axis, values);
  const std::string csv = scenario::sweep_csv(cells);
  if (out_file.empty())
    std::cout << csv;
  else
    write_file(out_file, csv);
  for (const auto& cell : cells)
    if (!cell.ok)
      std::cerr << "cell " << cell.axis << "=" << cell.value
                << " failed: " << cell.failure << "\n";
  return 0;
}

int cmd_analyze(const std::string& model, std::uint64_t n, std::uint32_t m,
                std::uint32_t u, double rho, double q0, std::uint64_t trials,
                std::uint64_t seed, double target) {
  std::cout << "n,m,u,rho,q0,model,probability\n";
  char line[160];
  if (target > 0.0) {
    // Committee sizing: the smallest u meeting the failure target.
    auto fm = model == "hypergeometric" ? assign::FailModel::Hypergeometric
                                        : assign::FailModel::Binomial;
    auto best = assign::min_committee_size(rho, q0, target, fm, n);
    if (!best) {
      std::cerr << "target unreachable for rho=" << rho << " q0=" << q0 << "\n";
      return 1;
    }
    std::snprintf(line, sizeof(line), "%llu,%u,%u,%.6f,%.6f,%s,%.12e\n",
                  static_cast<unsigned long long>(n), m, *best, rho, q0,
                  model.c_str(), target);
    std::cout << line;
    return 0;
  }

  double p = 0.0;
  if (model == "monte-carlo") {
    auto est = assign::epoch_failure_monte_carlo(n, m, u, rho, q0,
                                                 trials == 0 ? 100000 : trials,
                                                 seed);
    p = est.p_hat;
  } else {
    assign::FailureQuery q;
    q.n = n;
    q.u = u;
    q.rho = rho;
    q.q0 = q0;
    q.model = model == "hypergeometric" ? assign::FailModel::Hypergeometric
                                        : assign::FailModel::Binomial;
    p = assign::failure_probability(q);
  }
  std::snprintf(line, sizeof(line), "%llu,%u,%u,%.6f,%.6f,%s,%.12e\n",
                static_cast<unsigned long long>(n), m, u, rho, q0, model.c_str(),
                p);
  std::cout << line;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sharding-blockchain simulation harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_file, axis, values, message, model =
                                                                         "binomial";
  std::uint64_t seed = 0, n = 0, trials = 0;
  std::uint32_t m = 1, u = 4;
  double rho = 0.25, q0 = 2.0 / 3.0, target = 0.0;
  bool bft_only = false, list = false;

  auto* init = app.add_subcommand("init", "write a default config file");
  init->add_option("path", config_path, "output path")->required();

  auto* validate =
      app.add_subcommand("validate", "check a config against the model rules");
  validate->add_option("--config", config_path)->required();

  auto* enumerate =
      app.add_subcommand("enumerate", "count the composable system types");
  enumerate->add_flag("--bft-only", bft_only, "restrict consensus to BFT leaves");
  enumerate->add_option("--message", message, "fix the transmission-model leaf");
  enumerate->add_flag("--list", list, "print every combination");

  auto* run = app.add_subcommand("run", "execute one scenario");
  run->add_option("--config", config_path)->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "directory for report artifacts");

  auto* sweep = app.add_subcommand("sweep", "run one scenario per axis value");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--axis", axis)->required();
  sweep->add_option("--values", values)->required();
  sweep->add_option("--out", out_file, "csv output path");

  auto* analyze =
      app.add_subcommand("analyze", "committee failure-probability calculator");
  analyze->add_option("--model", model, "binomial|hypergeometric|monte-carlo");
  analyze->add_option("--n", n, "pool size");
  analyze->add_option("--m", m, "committees per epoch (monte-carlo)");
  analyze->add_option("--u", u, "committee size");
  analyze->add_option("--rho", rho, "adversary fraction");
  analyze->add_option("--q0", q0, "honest-fraction target");
  analyze->add_option("--trials", trials, "monte-carlo trials");
  analyze->add_option("--seed", seed, "monte-carlo seed");
  analyze->add_option("--target", target,
                      "failure target: search the smallest committee instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) return cmd_init(config_path);
    if (validate->parsed()) return cmd_validate(config_path);
    if (enumerate->parsed()) return cmd_enumerate(bft_only, message, list);
    if (run->parsed()) return cmd_run(config_path, seed, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, values, out_file);
    if (analyze->parsed())
      return cmd_analyze(model, n, m, u, rho, q0, trials, seed, target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
