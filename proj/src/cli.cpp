#include "dqkd/cli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dqkd/analysis.hpp"
#include "dqkd/postproc.hpp"
#include "dqkd/transcript_io.hpp"

namespace dqkd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPostprocDomain = 0xd9c5a1e0b3f74e21ULL;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (pos != v.size() || !std::isfinite(d)) bad_value(key, v, "a number");
  return d;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) bad_value(key, v, "a non-negative integer");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "protocol.n_rounds",   "protocol.p_check",   "protocol.disclose_fraction",
      "protocol.seed",       "protocol.variant",   "protocol.locus",
      "attack.forward",      "attack.announcer",   "attack.ancilla_dim",
      "attack.unitary_seed", "detector.eta0",      "detector.eta1",
      "detector.dark_rate",  "detector.blinded",   "detector.override",
      "output.dir",          "output.formats",     "postproc.enabled",
      "postproc.margin"};
  return keys;
}

std::vector<std::string> known_forward_attacks() {
  auto names = adv::forward_attack_names();
  names.push_back("unitary-haar");
  return names;
}

std::vector<std::string> known_announcers() {
  std::vector<std::string> names = {"honest"};
  for (auto& n : adv::faked_state_names()) names.push_back(n);
  return names;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string formats_string(const RunConfig& c) {
  std::string s;
  if (c.write_json) s = "json";
  if (c.write_csv) s += s.empty() ? "csv" : ",csv";
  return s;
}

json config_json(const RunConfig& c) {
  json j;
  j["protocol.n_rounds"] = c.session.n_rounds;
  j["protocol.p_check"] = c.session.p_check;
  j["protocol.disclose_fraction"] = c.session.disclose_fraction;
  j["protocol.seed"] = c.session.seed;
  j["protocol.variant"] = std::string(proto::to_string(c.session.variant));
  j["protocol.locus"] = std::string(proto::to_string(c.session.locus));
  j["attack.forward"] = c.forward_attack;
  j["attack.announcer"] = c.announcer;
  if (c.forward_attack == "unitary-haar") {
    j["attack.ancilla_dim"] = c.ancilla_dim;
    j["attack.unitary_seed"] = c.unitary_seed;
  }
  j["detector.eta0"] = c.eta0;
  j["detector.eta1"] = c.eta1;
  j["detector.dark_rate"] = c.dark_rate;
  j["detector.blinded"] = c.blinded;
  j["detector.override"] = c.detector_override;
  j["output.formats"] = formats_string(c);
  j["postproc.enabled"] = c.postprocess;
  j["postproc.margin"] = c.margin;
  return j;
}

json stats_json(const analysis::ChannelStats& s) {
  json j;
  j["f0"] = s.f0;
  j["f1"] = s.f1;
  j["fplus"] = s.fplus;
  j["fminus"] = s.fminus;
  j["n_check_used"] = s.n_check_used;
  j["n_check_matches"] = s.n_check_matches;
  j["xi"] = s.xi;
  j["xi_sigma"] = s.xi_sigma();
  j["e"] = s.e;
  j["e_sigma"] = s.e_sigma();
  j["n_disclosed"] = s.n_disclosed;
  j["n_disclosed_errors"] = s.n_disclosed_errors;
  return j;
}

json rate_json(const analysis::KeyRateReport& k) {
  json j;
  j["xi"] = k.xi;
  j["e"] = k.e;
  j["r"] = k.r;
  j["abort"] = k.abort;
  j["reason"] = k.reason;
  j["xi_clamped"] = k.xi_clamped;
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string summary_row(const RunConfig& c, const std::optional<analysis::ChannelStats>& s,
                        const std::optional<analysis::KeyRateReport>& k, bool abort) {
  std::ostringstream os;
  os << proto::to_string(c.session.variant) << ',' << proto::to_string(c.session.locus) << ',' << c.attack_label()
     << ',' << c.session.n_rounds;
  if (s) {
    for (double f : s->fidelities()) os << ',' << format_number(f);
    os << ',' << format_number(s->xi) << ',' << format_number(s->e);
  } else {
    os << ",,,,,,";
  }
  os << ',' << (k ? format_number(k->r) : std::string());
  os << ',' << (abort ? "true" : "false");
  return os.str();
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << contents;
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

void apply_formats(RunConfig& c, const std::string& formats) {
  bool json_on = false, csv_on = false;
  std::stringstream ss(formats);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "json")
      json_on = true;
    else if (item == "csv")
      csv_on = true;
    else
      bad_value("output.formats", item, "json or csv");
  }
  if (!json_on && !csv_on) bad_value("output.formats", formats, "at least one of json, csv");
  c.write_json = json_on;
  c.write_csv = csv_on;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "protocol.n_rounds") {
    c.session.n_rounds = to_u64(key, v);
  } else if (key == "protocol.p_check") {
    c.session.p_check = to_double(key, v);
  } else if (key == "protocol.disclose_fraction") {
    c.session.disclose_fraction = to_double(key, v);
  } else if (key == "protocol.seed") {
    c.session.seed = to_u64(key, v);
  } else if (key == "protocol.variant") {
    auto p = proto::parse_variant(v);
    if (!p) bad_value(key, v, "one of two_op, four_op, bb84_otp");
    c.session.variant = *p;
  } else if (key == "protocol.locus") {
    auto p = proto::parse_locus(v);
    if (!p) bad_value(key, v, "one of bob_measures, eve_measures");
    c.session.locus = *p;
  } else if (key == "attack.forward") {
    if (!contains(known_forward_attacks(), v))
      throw ConfigError("unknown forward attack '" + v + "'; known: " + join(known_forward_attacks()));
    c.forward_attack = v;
  } else if (key == "attack.announcer") {
    if (!contains(known_announcers(), v))
      throw ConfigError("unknown announcer '" + v + "'; known: " + join(known_announcers()));
    c.announcer = v;
  } else if (key == "attack.ancilla_dim") {
    c.ancilla_dim = to_u64(key, v);
  } else if (key == "attack.unitary_seed") {
    c.unitary_seed = to_u64(key, v);
  } else if (key == "detector.eta0") {
    c.eta0 = to_double(key, v);
  } else if (key == "detector.eta1") {
    c.eta1 = to_double(key, v);
  } else if (key == "detector.dark_rate") {
    c.dark_rate = to_double(key, v);
  } else if (key == "detector.blinded") {
    c.blinded = to_bool(key, v);
  } else if (key == "detector.override") {
    if (!v.empty() && !contains(adv::blinding_override_names(), v))
      throw ConfigError("unknown detector override '" + v + "'; known: " + join(adv::blinding_override_names()));
    c.detector_override = v;
  } else if (key == "output.dir") {
    if (v.empty()) bad_value(key, v, "a directory");
    c.out_dir = v;
  } else if (key == "output.formats") {
    apply_formats(c, v);
  } else if (key == "postproc.enabled") {
    c.postprocess = to_bool(key, v);
  } else if (key == "postproc.margin") {
    c.margin = to_u64(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'; known: " + join(known_keys()));
  }
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  RunConfig c = parse_config(is);
  for (const auto& [k, v] : overrides) apply_setting(c, k, v);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  try {
    session.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!contains(known_forward_attacks(), forward_attack))
    throw ConfigError("unknown forward attack '" + forward_attack + "'; known: " + join(known_forward_attacks()));
  if (!contains(known_announcers(), announcer))
    throw ConfigError("unknown announcer '" + announcer + "'; known: " + join(known_announcers()));
  if (announcer != "honest" && session.locus != proto::MeasurementLocus::EveMeasures)
    throw ConfigError("attack.announcer '" + announcer + "' needs protocol.locus = eve_measures");
  if (session.variant == proto::ProtocolVariant::Bb84Otp && session.locus == proto::MeasurementLocus::EveMeasures)
    throw ConfigError("bb84_otp has no backward qubit for Eve to measure; use protocol.locus = bob_measures");
  if (forward_attack == "unitary-haar" && !std::has_single_bit(ancilla_dim))
    throw ConfigError("attack.ancilla_dim must be a power of two");
  if (blinded && detector_override.empty()) throw ConfigError("detector.blinded needs detector.override");
  try {
    make_detector().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!write_json && !write_csv) throw ConfigError("output.formats must name json or csv");
}

adv::AttackStrategy RunConfig::make_attack() const {
  adv::AttackStrategy lines = [&] {
    if (forward_attack == "unitary-haar") {
      Rng rng(unitary_seed);
      return adv::attack_unitary_ancilla(qm::random_unitary(2 * ancilla_dim, rng), ancilla_dim);
    }
    return adv::forward_attack(forward_attack);
  }();
  if (session.locus != proto::MeasurementLocus::EveMeasures) return lines;
  adv::AttackStrategy announcing = announcer == "honest" ? adv::eve_measure_in_bob_basis()
                                                         : adv::eve_faked_states(adv::faked_state_strategy(announcer));
  return adv::combine(std::move(lines), std::move(announcing));
}

adv::DetectorModel RunConfig::make_detector() const {
  adv::DetectorModel m;
  m.eta0 = eta0;
  m.eta1 = eta1;
  m.dark_rate = dark_rate;
  m.blinded = blinded;
  if (!detector_override.empty()) m.override_outcome = adv::blinding_override(detector_override);
  return m;
}

std::string RunConfig::attack_label() const {
  if (session.locus == proto::MeasurementLocus::EveMeasures) return forward_attack + "+" + announcer;
  return forward_attack;
}

int cmd_run(const std::string& config_path, const Overrides& overrides, std::ostream& log) {
  RunConfig c;
  try {
    c = load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return cmd_run(c, log);
}

int cmd_run(const RunConfig& c, std::ostream& log) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  adv::AttackStrategy attack = c.make_attack();
  const proto::Transcript t = proto::run_session(c.session, attack, c.make_detector());
  const std::uint64_t seed = c.session.seed;

  std::optional<analysis::ChannelStats> stats;
  std::optional<analysis::KeyRateReport> rate;
  bool abort = false;
  std::string reason;
  try {
    stats = analysis::estimate_stats(t);
    rate = analysis::key_rate(stats->xi, stats->e);
    abort = rate->abort;
    reason = rate->reason;
  } catch (const analysis::InsufficientData& e) {
    abort = true;
    reason = e.what();
  }

  json post = nullptr;
  std::optional<postproc::FinalKey> final_key;
  if (!abort && c.postprocess) {
    Rng rec_rng = Rng::derive(seed, kPostprocDomain, 1);
    const auto rec = postproc::reconcile(t.alice_raw_key, t.bob_raw_key, stats->e, rec_rng);
    post = json::object();
    post["n_raw"] = t.alice_raw_key.size();
    post["parity_bits"] = rec.leaked_bits;
    post["tag_bits"] = rec.tag_bits;
    post["verified"] = rec.verified;
    if (!rec.verified) {
      abort = true;
      reason = rec.failure_reason;
    } else {
      const std::uint64_t pa_seed = Rng::derive(seed, kPostprocDomain, 2)();
      const std::size_t ec_leak = rec.leaked_bits + rec.tag_bits;
      auto fa = postproc::privacy_amplify(t.alice_raw_key, stats->xi, ec_leak, c.margin, pa_seed);
      auto fb = postproc::privacy_amplify(rec.corrected_key, stats->xi, ec_leak, c.margin, pa_seed);
      post["ec_leak"] = ec_leak;
      post["pa_removed"] = fa.accounting.pa_removed;
      post["margin"] = fa.accounting.margin;
      post["final_length"] = fa.length;
      post["keys_match"] = fa.bits == fb.bits;
      if (fa.abort) {
        abort = true;
        reason = fa.reason;
      } else if (fa.bits != fb.bits) {
        abort = true;
        reason = "final keys differ after verification";
      } else {
        final_key = std::move(fa);
      }
    }
  }

  json report;
  report["seed"] = seed;
  report["config"] = config_json(c);
  report["attack"] = attack.name();
  report["n_rounds"] = t.rounds.size();
  report["raw_key_length"] = t.alice_raw_key.size();
  report["losses"] = {{"no_click", t.losses.no_click}, {"double_click", t.losses.double_click}};
  report["stats"] = stats ? stats_json(*stats) : json(nullptr);
  report["key_rate"] = rate ? rate_json(*rate) : json(nullptr);
  report["postproc"] = post;
  report["abort"] = abort;
  report["reason"] = reason;

  try {
    std::ostringstream tr;
    proto::write_transcript(tr, t);
    write_file_atomic(path_in(c.out_dir, "transcript.jsonl"), tr.str());
    if (c.write_json) write_file_atomic(path_in(c.out_dir, "stats.json"), dump(report));
    if (c.write_csv) {
      std::string csv = "# seed=" + std::to_string(seed) + "\n" + kSummaryHeader + "\n" +
                        summary_row(c, stats, rate, abort) + "\n";
      write_file_atomic(path_in(c.out_dir, "summary.csv"), csv);
    }
    if (final_key) {
      write_file_atomic(path_in(c.out_dir, "alice_key.hex"), to_hex(final_key->bits) + "\n");
      write_file_atomic(path_in(c.out_dir, "bob_key.hex"), to_hex(final_key->bits) + "\n");
      json acc;
      acc["seed"] = seed;
      acc["n_raw"] = final_key->accounting.n_raw;
      acc["ec_leak"] = final_key->accounting.ec_leak;
      acc["pa_removed"] = final_key->accounting.pa_removed;
      acc["margin"] = final_key->accounting.margin;
      acc["final_length"] = final_key->length;
      write_file_atomic(path_in(c.out_dir, "key_accounting.json"), dump(acc));
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  log << "run: " << proto::to_string(c.session.variant) << " " << proto::to_string(c.session.locus) << " attack="
      << c.attack_label() << " seed=" << seed;
  if (stats) log << " xi=" << format_number(stats->xi) << " e=" << format_number(stats->e);
  if (rate) log << " r=" << format_number(rate->r);
  if (final_key) log << " final_key_bits=" << final_key->length;
  log << (abort ? " ABORT (" + reason + ")" : std::string(" ok")) << "\n";
  return abort ? kExitAbort : kExitOk;
}

int cmd_verify_mdi(const VerifyMdiOptions& opts, std::ostream& log) {
  if (opts.trials == 0) {
    log << "error: --trials must be at least 1\n";
    return kExitUsage;
  }
  if (opts.ancilla_dims.empty() || std::count(opts.ancilla_dims.begin(), opts.ancilla_dims.end(), 0u) > 0) {
    log << "error: ancilla dimensions must be non-empty and >= 1\n";
    return kExitUsage;
  }
  if (!(opts.tol > 0.0)) {
    log << "error: --tol must be positive\n";
    return kExitUsage;
  }
  if (!opts.write_json && !opts.write_csv) {
    log << "error: no output format selected\n";
    return kExitUsage;
  }

  constexpr double kPaTol = 1e-9;
  const auto ensembles =
      opts.negative_control ? analysis::BasisEnsembles::basis_dependent() : analysis::BasisEnsembles::standard();

  const double pa_identity = analysis::pa_rate(analysis::build_rho_abe(qm::identity(2), 1), 1);
  const double rate_identity = analysis::key_rate(1.0, 0.0).r;
  const bool identity_ok = std::abs(pa_identity - 1.0) <= kPaTol && std::abs(pa_identity - rate_identity) <= kPaTol;

  json checks = json::array();
  json offending = json::array();
  std::string csv = "# seed=" + std::to_string(opts.seed) + "\ntrial,ancilla_dim,unitary_seed,max_deviation,r_pa,pass\n";
  double max_dev = 0.0, min_rpa = 1.0, max_rpa = 0.0;
  std::size_t n_indep = 0, n_checks = 0;
  bool all_ok = identity_ok;

  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    for (std::size_t d : opts.ancilla_dims) {
      const std::uint64_t useed = Rng::derive(opts.seed, trial, d)();
      Rng urng(useed);
      const qm::Matrix u = qm::random_unitary(2 * d, urng);
      const auto rep = analysis::verify_basis_independence(u, d, opts.tol, ensembles);
      const double rpa = analysis::pa_rate(analysis::build_rho_abe(u, d), d);
      const bool rpa_ok = rpa >= -kPaTol && rpa <= 1.0 + kPaTol;
      // Under the negative control every check is expected to fail.
      const bool ok = opts.negative_control ? !rep.pass : (rep.pass && rpa_ok);
      ++n_checks;
      if (rep.pass) ++n_indep;
      max_dev = std::max(max_dev, rep.max_deviation);
      min_rpa = std::min(min_rpa, rpa);
      max_rpa = std::max(max_rpa, rpa);
      json row;
      row["trial"] = trial;
      row["ancilla_dim"] = d;
      row["unitary_seed"] = useed;
      row["max_deviation"] = rep.max_deviation;
      row["r_pa"] = rpa;
      row["pass"] = ok;
      if (!ok) {
        all_ok = false;
        offending.push_back(row);
      }
      checks.push_back(row);
      csv += std::to_string(trial) + "," + std::to_string(d) + "," + std::to_string(useed) + "," +
             format_number(rep.max_deviation) + "," + format_number(rpa) + "," + (ok ? "true" : "false") + "\n";
    }
  }

  json report;
  report["seed"] = opts.seed;
  report["trials"] = opts.trials;
  report["ancilla_dims"] = opts.ancilla_dims;
  report["tol"] = opts.tol;
  report["pa_tol"] = kPaTol;
  report["negative_control"] = opts.negative_control;
  report["pa_rate_identity"] = pa_identity;
  report["key_rate_identity"] = rate_identity;
  report["identity_ok"] = identity_ok;
  report["n_checks"] = n_checks;
  report["n_basis_independent"] = n_indep;
  report["max_deviation"] = max_dev;
  report["min_r_pa"] = min_rpa;
  report["max_r_pa"] = max_rpa;
  report["offending"] = offending;
  report["verdict"] = all_ok ? "pass" : "fail";
  report["checks"] = checks;

  try {
    if (opts.write_json) write_file_atomic(path_in(opts.out_dir, "verify_mdi.json"), dump(report));
    if (opts.write_csv) write_file_atomic(path_in(opts.out_dir, "verify_mdi.csv"), csv);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  log << "verify-mdi: " << n_checks << " checks" << (opts.negative_control ? " (negative control)" : "")
      << ", max deviation " << format_number(max_dev) << ", r_pa in [" << format_number(min_rpa) << ", "
      << format_number(max_rpa) << "], pa_rate(I) = " << format_number(pa_identity) << ": "
      << (all_ok ? "pass" : "FAIL") << "\n";
  if (!all_ok)
    for (const auto& o : offending)
      log << "  offending: trial " << o["trial"].get<std::size_t>() << " ancilla_dim "
          << o["ancilla_dim"].get<std::size_t>() << " unitary_seed " << o["unitary_seed"].get<std::uint64_t>() << "\n";
  return all_ok ? kExitOk : kExitCheckFailed;
}

namespace {

struct PairedRow {
  proto::ProtocolVariant variant;
  std::string attack;
  analysis::ChannelStats bob, eve;
  double xi_bound = 0, e_bound = 0;
  bool agree = false;
  bool abort = false;
  double eve_info = 0;
};

struct AnnouncerRow {
  proto::ProtocolVariant variant;
  std::string announcer;
  analysis::ChannelStats stats;
  double eve_info = 0;
  bool zero_leak = false;
};

constexpr double kZeroLeakTol = 1e-12;

adv::AttackStrategy announcer_strategy(const std::string& name) {
  return name == "honest" ? adv::eve_measure_in_bob_basis() : adv::eve_faked_states(adv::faked_state_strategy(name));
}

PairedRow run_pair(proto::SessionConfig cfg, const std::string& attack) {
  PairedRow row{cfg.variant, attack, {}, {}};
  cfg.locus = proto::MeasurementLocus::BobMeasures;
  auto bob_attack = adv::forward_attack(attack);
  row.bob = analysis::estimate_stats(proto::run_session(cfg, bob_attack));
  cfg.locus = proto::MeasurementLocus::EveMeasures;
  auto eve_attack = adv::combine(adv::forward_attack(attack), adv::eve_measure_in_bob_basis());
  row.eve = analysis::estimate_stats(proto::run_session(cfg, eve_attack));
  row.xi_bound = 4.0 * std::hypot(row.bob.xi_sigma(), row.eve.xi_sigma());
  row.e_bound = 4.0 * std::hypot(row.bob.e_sigma(), row.eve.e_sigma());
  row.agree = std::abs(row.bob.xi - row.eve.xi) <= row.xi_bound && std::abs(row.bob.e - row.eve.e) <= row.e_bound;
  row.abort = analysis::key_rate(row.bob.xi, row.bob.e).abort;
  row.eve_info = analysis::eve_information(eve_attack, cfg.variant);
  return row;
}

AnnouncerRow run_announcer(proto::SessionConfig cfg, const std::string& name) {
  AnnouncerRow row{cfg.variant, name, {}};
  cfg.locus = proto::MeasurementLocus::EveMeasures;
  auto strategy = adv::combine(adv::attack_none(), announcer_strategy(name));
  row.stats = analysis::estimate_stats(proto::run_session(cfg, strategy));
  row.eve_info = analysis::eve_information(strategy, cfg.variant);
  row.zero_leak = row.eve_info <= kZeroLeakTol;
  return row;
}

}  // namespace

int cmd_attack_suite(const AttackSuiteOptions& opts, std::ostream& log) {
  if (opts.n_rounds == 0) {
    log << "error: round count must be at least 1\n";
    return kExitUsage;
  }
  if (!opts.write_json && !opts.write_csv) {
    log << "error: no output format selected\n";
    return kExitUsage;
  }
  proto::SessionConfig base;
  base.n_rounds = opts.n_rounds;
  base.seed = opts.seed;

  const std::array variants = {proto::ProtocolVariant::TwoOp, proto::ProtocolVariant::FourOp};
  std::vector<std::future<PairedRow>> pair_jobs;
  std::vector<std::future<AnnouncerRow>> ann_jobs;
  for (auto v : variants) {
    proto::SessionConfig cfg = base;
    cfg.variant = v;
    for (const auto& a : adv::forward_attack_names()) pair_jobs.push_back(std::async(std::launch::async, run_pair, cfg, a));
    for (const auto& a : known_announcers()) ann_jobs.push_back(std::async(std::launch::async, run_announcer, cfg, a));
  }

  std::vector<PairedRow> pairs;
  std::vector<AnnouncerRow> anns;
  try {
    for (auto& j : pair_jobs) pairs.push_back(j.get());
    for (auto& j : ann_jobs) anns.push_back(j.get());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << " (seed " << opts.seed << ")\n";
    return kExitCheckFailed;
  }

  std::vector<std::pair<std::string, analysis::ProtocolComparison>> bc;
  for (const char* a : {"none", "intercept-resend-random", "intercept-resend-z"}) {
    auto s = adv::forward_attack(a);
    bc.emplace_back(a, analysis::compare_protocols_bc(s.forward()));
  }

  bool all_agree = true, all_zero = true, bc_ok = true;
  for (const auto& p : pairs) all_agree = all_agree && p.agree;
  for (const auto& a : anns) all_zero = all_zero && a.zero_leak;
  for (const auto& [n, c] : bc) bc_ok = bc_ok && c.pass;
  const bool ok = all_agree && all_zero && bc_ok;

  std::string pair_csv = "# seed=" + std::to_string(opts.seed) +
                         "\nvariant,attack,n,xi_bob,xi_eve,xi_bound,e_bob,e_eve,e_bound,agree,abort,eve_information\n";
  json pair_json = json::array();
  for (const auto& p : pairs) {
    pair_csv += std::string(proto::to_string(p.variant)) + "," + p.attack + "," + std::to_string(opts.n_rounds) + "," +
                format_number(p.bob.xi) + "," + format_number(p.eve.xi) + "," + format_number(p.xi_bound) + "," +
                format_number(p.bob.e) + "," + format_number(p.eve.e) + "," + format_number(p.e_bound) + "," +
                (p.agree ? "true" : "false") + "," + (p.abort ? "true" : "false") + "," + format_number(p.eve_info) +
                "\n";
    json j;
    j["variant"] = std::string(proto::to_string(p.variant));
    j["attack"] = p.attack;
    j["bob"] = stats_json(p.bob);
    j["eve"] = stats_json(p.eve);
    j["xi_bound"] = p.xi_bound;
    j["e_bound"] = p.e_bound;
    j["agree"] = p.agree;
    j["abort"] = p.abort;
    j["eve_information"] = p.eve_info;
    pair_json.push_back(j);
  }
  std::string ann_csv = "# seed=" + std::to_string(opts.seed) + "\nvariant,announcer,n,xi,e,eve_information,zero_leak\n";
  json ann_json = json::array();
  for (const auto& a : anns) {
    ann_csv += std::string(proto::to_string(a.variant)) + "," + a.announcer + "," + std::to_string(opts.n_rounds) + "," +
               format_number(a.stats.xi) + "," + format_number(a.stats.e) + "," + format_number(a.eve_info) + "," +
               (a.zero_leak ? "true" : "false") + "\n";
    json j;
    j["variant"] = std::string(proto::to_string(a.variant));
    j["announcer"] = a.announcer;
    j["stats"] = stats_json(a.stats);
    j["eve_information"] = a.eve_info;
    j["zero_leak"] = a.zero_leak;
    ann_json.push_back(j);
  }
  json bc_json = json::array();
  for (const auto& [n, c] : bc)
    bc_json.push_back({{"forward_attack", n}, {"max_deviation", c.max_deviation}, {"tol", c.tol}, {"pass", c.pass}});

  json report;
  report["seed"] = opts.seed;
  report["n_rounds"] = opts.n_rounds;
  report["sigma_multiplier"] = 4.0;
  report["zero_leak_tol"] = kZeroLeakTol;
  report["paired"] = pair_json;
  report["announcers"] = ann_json;
  report["compare_protocols_bc"] = bc_json;
  report["verdict"] = {{"paired_agreement", all_agree}, {"zero_leakage", all_zero}, {"protocols_bc", bc_ok},
                       {"pass", ok}};

  try {
    if (opts.write_json) write_file_atomic(path_in(opts.out_dir, "attack_suite.json"), dump(report));
    if (opts.write_csv) {
      write_file_atomic(path_in(opts.out_dir, "attack_suite.csv"), pair_csv);
      write_file_atomic(path_in(opts.out_dir, "attack_suite_announcers.csv"), ann_csv);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  log << "attack-suite: seed " << opts.seed << ", n " << opts.n_rounds << ": paired agreement "
      << (all_agree ? "pass" : "FAIL") << ", zero leakage " << (all_zero ? "pass" : "FAIL") << ", protocols b/c "
      << (bc_ok ? "pass" : "FAIL") << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_analyze(const std::string& transcript_path, const std::optional<std::string>& out_dir, std::ostream& out,
                std::ostream& log) {
  proto::Transcript t;
  try {
    std::ifstream is(transcript_path);
    if (!is) throw std::runtime_error("cannot read transcript '" + transcript_path + "'");
    t = proto::read_transcript(is);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  json report;
  report["seed"] = t.config.seed;
  report["config"] = proto::config_to_json(t.config);
  report["n_rounds"] = t.rounds.size();
  report["raw_key_length"] = t.alice_raw_key.size();
  report["losses"] = {{"no_click", t.losses.no_click}, {"double_click", t.losses.double_click}};
  bool abort = false;
  std::string reason;
  try {
    const auto s = analysis::estimate_stats(t);
    const auto k = analysis::key_rate(s.xi, s.e);
    report["stats"] = stats_json(s);
    report["key_rate"] = rate_json(k);
    abort = k.abort;
    reason = k.reason;
  } catch (const analysis::InsufficientData& e) {
    report["stats"] = nullptr;
    report["key_rate"] = nullptr;
    abort = true;
    reason = e.what();
  }
  report["abort"] = abort;
  report["reason"] = reason;

  if (out_dir) {
    try {
      write_file_atomic(path_in(*out_dir, "analysis.json"), dump(report));
    } catch (const std::exception& e) {
      log << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  } else {
    out << dump(report);
  }
  return abort ? kExitAbort : kExitOk;
}

}  // namespace dqkd::cli
