#pragma once

// Batch harness behind the `dqkd` tool: config files, the run /
// verify-mdi / attack-suite / analyze commands, and their report files.
//
// Config files are flat `section.key = value` lines; `#` starts a comment.
//
//   protocol.n_rounds, protocol.p_check, protocol.disclose_fraction,
//   protocol.seed, protocol.variant (two_op|four_op|bb84_otp),
//   protocol.locus (bob_measures|eve_measures)
//   attack.forward     forward-attack registry name, or unitary-haar
//   attack.announcer   honest or a faked-state registry name (eve_measures)
//   attack.ancilla_dim, attack.unitary_seed   (unitary-haar only)
//   detector.eta0, detector.eta1, detector.dark_rate,
//   detector.blinded (true|false), detector.override
//   output.dir, output.formats (comma list of json,csv)
//   postproc.enabled (true|false), postproc.margin

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/protocol.hpp"

namespace dqkd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAbort = 2;
inline constexpr int kExitCheckFailed = 3;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  proto::SessionConfig session;
  std::string forward_attack = "none";
  std::string announcer = "honest";
  std::size_t ancilla_dim = 2;
  std::uint64_t unitary_seed = 0;
  double eta0 = 1.0;
  double eta1 = 1.0;
  double dark_rate = 0.0;
  bool blinded = false;
  std::string detector_override;
  std::string out_dir = "out";
  bool write_json = true;
  bool write_csv = true;
  bool postprocess = true;
  std::size_t margin = 32;

  /// Throws ConfigError; unknown attack, announcer and override names are
  /// reported with the list of known names.
  void validate() const;
  adv::AttackStrategy make_attack() const;
  adv::DetectorModel make_detector() const;
  std::string attack_label() const;
};

using Overrides = std::map<std::string, std::string>;

/// Applies `key = value` lines on top of `base`. Throws ConfigError.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
void apply_setting(RunConfig& c, const std::string& key, const std::string& value);
RunConfig load_config(const std::string& path, const Overrides& overrides);

/// Comma-separated format list into the write flags.
void apply_formats(RunConfig& c, const std::string& formats);

/// Stable CSV schema of the run summary.
inline constexpr const char* kSummaryHeader = "variant,locus,attack,n,f0,f1,fplus,fminus,xi,e,r,abort";

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string format_number(double v);

int cmd_run(const std::string& config_path, const Overrides& overrides, std::ostream& log);
int cmd_run(const RunConfig& config, std::ostream& log);

struct VerifyMdiOptions {
  std::size_t trials = 100;
  std::vector<std::size_t> ancilla_dims = {1, 2, 4};
  double tol = 1e-12;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool negative_control = false;
  bool write_json = true;
  bool write_csv = true;
};

int cmd_verify_mdi(const VerifyMdiOptions& opts, std::ostream& log);

struct AttackSuiteOptions {
  std::size_t n_rounds = 100000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool write_json = true;
  bool write_csv = true;
};

int cmd_attack_suite(const AttackSuiteOptions& opts, std::ostream& log);

int cmd_analyze(const std::string& transcript_path, const std::optional<std::string>& out_dir, std::ostream& out,
                std::ostream& log);

}  // namespace dqkd::cli
