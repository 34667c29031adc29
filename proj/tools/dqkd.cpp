#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dqkd/cli.hpp"

namespace {

bool parse_formats(const std::string& s, bool& json, bool& csv) {
  dqkd::cli::RunConfig tmp;
  try {
    dqkd::cli::apply_formats(tmp, s);
  } catch (const dqkd::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return false;
  }
  json = tmp.write_json;
  csv = tmp.write_csv;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dqkd::cli;
  CLI::App app{"Two-way four-state QKD simulator and security checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run one session from a config file");
  run->add_option("--config", config_path, "Config file (key = value lines)")->required();
  run->add_option("--seed", seed, "Override protocol.seed");
  run->add_option("--out", out_dir, "Override output.dir");
  run->add_option("--format", format, "json, csv or json,csv");
  run->add_option("--set", sets, "Extra key=value override (repeatable)");

  VerifyMdiOptions vm;
  std::string vm_format;
  auto* verify = app.add_subcommand("verify-mdi", "Check the basis-independence identity over random unitaries");
  verify->add_option("--trials", vm.trials, "Random unitaries per ancilla dimension")->capture_default_str();
  verify->add_option("--ancilla-dims", vm.ancilla_dims, "Ancilla dimensions")->capture_default_str();
  verify->add_option("--tol", vm.tol, "Entrywise tolerance")->capture_default_str();
  verify->add_option("--seed", vm.seed, "Seed")->capture_default_str();
  verify->add_option("--out", vm.out_dir, "Output directory")->capture_default_str();
  verify->add_option("--format", vm_format, "json, csv or json,csv");
  verify->add_flag("--negative-control", vm.negative_control, "Use basis-dependent ensembles; failure expected");

  AttackSuiteOptions as;
  std::string as_format;
  auto* suite = app.add_subcommand("attack-suite", "Paired BobMeasures/EveMeasures runs over the attack registry");
  suite->add_option("--rounds", as.n_rounds, "Rounds per session")->capture_default_str();
  suite->add_option("--seed", as.seed, "Seed")->capture_default_str();
  suite->add_option("--out", as.out_dir, "Output directory")->capture_default_str();
  suite->add_option("--format", as_format, "json, csv or json,csv");

  std::string transcript;
  std::optional<std::string> an_out;
  auto* analyze = app.add_subcommand("analyze", "Recompute statistics and key rate from a transcript");
  analyze->add_option("transcript", transcript, "Transcript (.jsonl)")->required();
  analyze->add_option("--out", an_out, "Write analysis.json here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*run) {
    Overrides ov;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << s << "'\n";
        return kExitUsage;
      }
      ov[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (seed) ov["protocol.seed"] = std::to_string(*seed);
    if (!out_dir.empty()) ov["output.dir"] = out_dir;
    if (!format.empty()) ov["output.formats"] = format;
    return cmd_run(config_path, ov, std::cerr);
  }
  if (*verify) {
    if (!vm_format.empty() && !parse_formats(vm_format, vm.write_json, vm.write_csv)) return kExitUsage;
    return cmd_verify_mdi(vm, std::cerr);
  }
  if (*suite) {
    if (!as_format.empty() && !parse_formats(as_format, as.write_json, as.write_csv)) return kExitUsage;
    return cmd_attack_suite(as, std::cerr);
  }
  return cmd_analyze(transcript, an_out, std::cout, std::cerr);
}
