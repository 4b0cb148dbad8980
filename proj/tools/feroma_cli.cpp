// Copyright 2026 The Feroma Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "feroma/config.hpp"
#include "feroma/error.hpp"
#include "feroma/experiment.hpp"
#include "feroma/kernels.hpp"
#include "feroma/validation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct RunOptions {
  std::string config;
  std::string aggregation;
  std::string output;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
};

struct ValidateOptions {
  std::size_t pairs = 10000;
  std::size_t dim = 10;
  double lambda_min = 0.5;
  double lambda_max = 2.0;
  std::size_t trials = 1000;
  std::size_t samples = 300;
  std::size_t sanity_instances = 200;
  std::uint64_t seed = 42;
  std::string output;
  bool inject_fault = false;
};

feroma::ExperimentConfig LoadWithOverrides(const RunOptions& opt) {
  feroma::ExperimentConfig cfg = feroma::LoadConfig(opt.config);
  for (const auto& o : opt.overrides) feroma::ApplyOverride(cfg, o);
  if (!opt.aggregation.empty()) feroma::ApplyOverride(cfg, "federation.aggregation=" + opt.aggregation);
  if (!opt.output.empty()) cfg.output_dir = opt.output;
  if (!opt.seeds.empty()) cfg.seeds = opt.seeds;
  cfg.Validate();
  return cfg;
}

int CmdRun(const RunOptions& opt) {
  const feroma::ExperimentConfig cfg = LoadWithOverrides(opt);
  const auto summary = feroma::RunExperiment(cfg);
  for (const auto& s : summary.seeds) {
    std::cout << "seed " << s.seed << ": final accuracy " << s.final_mean_accuracy
              << ", test accuracy " << s.test_mean_accuracy << '\n';
  }
  std::cout << "final accuracy " << summary.mean_accuracy << " +- " << summary.std_accuracy
            << " over " << summary.seeds.size() << " seeds\n"
            << "profile overhead " << summary.cost.overhead_percent << "% (d/|theta| = "
            << summary.cost.profile_ratio << (summary.cost.compact ? "" : ", above 1e-2") << ")\n"
            << "outputs in " << cfg.output_dir.string() << '\n';
  return kExitOk;
}

int CmdGenData(const RunOptions& opt) {
  const feroma::ExperimentConfig cfg = LoadWithOverrides(opt);
  const std::size_t files = feroma::WriteDatasets(cfg);
  std::cout << "wrote " << files << " datasets under " << (cfg.output_dir / "data").string()
            << '\n';
  return kExitOk;
}

int CmdValidate(const ValidateOptions& opt) {
  const auto fidelity =
      feroma::FidelitySweep(opt.pairs, opt.dim, opt.lambda_min, opt.lambda_max, opt.seed);
  const auto js = feroma::JsSweep(1000, 16, opt.seed);
  const feroma::DpeConfig dpe;
  const auto fixture = feroma::MakeStochasticityFixture(opt.samples, dpe, opt.seed);
  const auto stochasticity =
      feroma::StochasticityCheck(fixture.encoder, fixture.features, opt.trials, opt.seed);
  const auto sanity = feroma::SanitySuite(
      opt.seed, opt.sanity_instances,
      opt.inject_fault ? feroma::Fault::kScaleWeights : feroma::Fault::kNone);

  const bool ok = fidelity.bound_violations == 0 && stochasticity.passed && sanity.passed();
  nlohmann::json report = {{"schema_version", feroma::kSummarySchemaVersion},
                           {"seed", opt.seed},
                           {"simd", feroma::kernels::BackendName(feroma::kernels::ActiveBackend())},
                           {"fidelity", feroma::ToJson(fidelity)},
                           {"js", feroma::ToJson(js)},
                           {"stochasticity", feroma::ToJson(stochasticity)},
                           {"sanity", feroma::ToJson(sanity)},
                           {"passed", ok}};

  std::cout << "fidelity: " << fidelity.pairs_tested << " pairs, " << fidelity.bound_violations
            << " bound violations\n"
            << "stochasticity: max variance " << stochasticity.max_empirical << " vs rho^2 "
            << stochasticity.rho2 << (stochasticity.passed ? " ok" : " FAILED") << '\n';
  for (const auto& p : sanity.properties) {
    std::cout << "sanity " << p.name << ": " << (p.passed ? "ok" : "FAILED");
    if (p.failing_seed) std::cout << " (seed " << *p.failing_seed << ": " << p.detail << ")";
    std::cout << '\n';
  }
  if (!opt.output.empty()) {
    const std::filesystem::path out_path(opt.output);
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path);
    if (!out) throw feroma::Error("cannot write '" + opt.output + "'");
    out << report.dump(2) << '\n';
  }
  return ok ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with distribution-profile model mapping", "feroma"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "train and test over every configured seed");
  run->add_option("-c,--config", run_opt.config, "experiment config file")->required();
  run->add_option("--aggregation", run_opt.aggregation, "feroma or fedavg");
  run->add_option("-o,--output", run_opt.output, "output directory");
  run->add_option("--seeds", run_opt.seeds, "seed list")->delimiter(',');
  run->add_option("--set", run_opt.overrides, "section.key=value override");

  RunOptions gen_opt;
  auto* gen = app.add_subcommand("gen-data", "write per-round client datasets and a tag manifest");
  gen->add_option("-c,--config", gen_opt.config, "experiment config file")->required();
  gen->add_option("-o,--output", gen_opt.output, "output directory");
  gen->add_option("--set", gen_opt.overrides, "section.key=value override");

  ValidateOptions val_opt;
  auto* val = app.add_subcommand("validate", "fidelity, stochasticity and sanity checks");
  val->add_option("--pairs", val_opt.pairs, "Gaussian pairs in the fidelity sweep");
  val->add_option("--dim", val_opt.dim, "Gaussian dimension");
  val->add_option("--lambda-min", val_opt.lambda_min, "smallest variance");
  val->add_option("--lambda-max", val_opt.lambda_max, "largest variance");
  val->add_option("--trials", val_opt.trials, "repeated extractions");
  val->add_option("--samples", val_opt.samples, "samples in the frozen dataset");
  val->add_option("--instances", val_opt.sanity_instances, "randomized instances per property");
  val->add_option("--seed", val_opt.seed, "seed");
  val->add_option("-o,--output", val_opt.output, "JSON report path");
  val->add_flag("--inject-fault", val_opt.inject_fault, "scale association weights by 2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return CmdRun(run_opt);
    if (*gen) return CmdGenData(gen_opt);
    if (*val) return CmdValidate(val_opt);
  } catch (const feroma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const feroma::FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const feroma::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitFailed;
}
