// Acceptance checks for the simulator. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dqkd/analysis.hpp"
#include "dqkd/cli.hpp"
#include "dqkd/postproc.hpp"
#include "dqkd/protocol.hpp"

using namespace dqkd;
namespace fs = std::filesystem;

namespace {

constexpr double kFidelityTol = 0.02;
constexpr double kXiTol = 0.02;
constexpr double kMachineTol = 1e-15;
constexpr double kIndependenceTol = 1e-12;
constexpr double kPaTol = 1e-9;
constexpr double kSigmas = 4.0;
constexpr double kZeroLeakTol = 1e-12;
constexpr double kBcTol = 1e-12;
constexpr double kBaselineSeconds = 5.0;
constexpr double kMdiSeconds = 10.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

proto::SessionConfig session(std::size_t n, proto::ProtocolVariant v, std::uint64_t seed) {
  proto::SessionConfig c;
  c.n_rounds = n;
  c.variant = v;
  c.seed = seed;
  return c;
}

double h(double x) {
  if (x <= 0 || x >= 1) return 0;
  return -x * std::log2(x) - (1 - x) * std::log2(1 - x);
}

Outcome noiseless_baseline() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  for (auto v : {proto::ProtocolVariant::TwoOp, proto::ProtocolVariant::FourOp}) {
    auto none = adv::attack_none();
    const auto s = analysis::estimate_stats(proto::run_session(session(10000, v, 1), none));
    const auto r = analysis::key_rate(s.xi, s.e);
    const bool ok = s.f0 == 1.0 && s.f1 == 1.0 && s.fplus == 1.0 && s.fminus == 1.0 && s.e == 0.0 && r.r == 1.0 &&
                    !r.abort;
    o.pass = o.pass && ok;
    o.detail += std::string(proto::to_string(v)) + " r=" + fmt(r.r) + " ";
  }
  const double dt = seconds_since(t0);
  o.pass = o.pass && dt < kBaselineSeconds;
  o.detail += "time=" + fmt(dt) + "s";
  return o;
}

Outcome intercept_resend() {
  Outcome o;
  auto ir = adv::attack_intercept_resend(adv::BasisPolicy::RandomZX);
  const auto s = analysis::estimate_stats(proto::run_session(session(100000, proto::ProtocolVariant::TwoOp, 1), ir));
  for (double f : s.fidelities()) o.pass = o.pass && std::abs(f - 0.75) <= kFidelityTol;
  const auto r = analysis::key_rate(s.xi, s.e);
  o.pass = o.pass && std::abs(s.xi - 0.5) <= kXiTol && r.abort && r.r <= 0;
  const double exact = analysis::xi_from_fidelities(analysis::exact_fidelities(ir.forward()));
  o.pass = o.pass && std::abs(exact - 0.5) <= kMachineTol;
  o.detail = "f=(" + fmt(s.f0) + "," + fmt(s.f1) + "," + fmt(s.fplus) + "," + fmt(s.fminus) + ") xi=" + fmt(s.xi) +
             " r=" + fmt(r.r) + " exact_xi-1/2=" + fmt(exact - 0.5);
  return o;
}

// The encoding table written out cell by cell: basis X rows then basis Z.
int table_cell(qm::Basis b, qm::PauliOp op) {
  using qm::PauliOp;
  if (b == qm::Basis::X) return (op == PauliOp::Z || op == PauliOp::Y) ? 1 : 0;
  return (op == PauliOp::X || op == PauliOp::Y) ? 1 : 0;
}

Outcome encoding_table() {
  Outcome o;
  int correct = 0, cells = 0;
  for (auto b : {qm::Basis::X, qm::Basis::Z})
    for (auto op : qm::kAllOps) {
      bool cell_ok = proto::key_bit_from_table(b, op) == table_cell(b, op);
      for (auto s : qm::kAllStates) {
        if (qm::basis(s) != b) continue;
        const auto returned = qm::apply_unitary(qm::bb84_ket(s), qm::pauli_matrix(op));
        const auto p = qm::born_probabilities(qm::DensityMatrix::from_pure(returned), b);
        const bool deterministic = std::abs(p[0] - 1) < kIndependenceTol || std::abs(p[1] - 1) < kIndependenceTol;
        const int decoded = proto::bob_decode(qm::bit(s), p[1] > 0.5 ? 1 : 0);
        const bool ok = deterministic && decoded == table_cell(b, op);
        correct += ok;
        cell_ok = cell_ok && ok;
      }
      cells += cell_ok;
    }
  o.pass = correct == 16 && cells == 8;
  o.detail = std::to_string(correct) + "/16 cases, " + std::to_string(cells) + "/8 cells";
  return o;
}

struct MdiSweep {
  std::size_t checks = 0, independent = 0, negative_failed = 0;
  double max_dev = 0, min_rpa = 1, max_rpa = 0;
  double seconds = 0;
};

MdiSweep mdi_sweep() {
  MdiSweep m;
  const auto t0 = std::chrono::steady_clock::now();
  const auto negative = analysis::BasisEnsembles::basis_dependent();
  for (std::size_t trial = 0; trial < 100; ++trial)
    for (std::size_t d : {1u, 2u, 4u}) {
      Rng rng = Rng::derive(2024, trial, d);
      const auto u = qm::random_unitary(2 * d, rng);
      const auto rep = analysis::verify_basis_independence(u, d, kIndependenceTol);
      ++m.checks;
      m.independent += rep.pass;
      m.max_dev = std::max(m.max_dev, rep.max_deviation);
      m.negative_failed += !analysis::verify_basis_independence(u, d, kIndependenceTol, negative).pass;
      const double r = analysis::pa_rate(analysis::build_rho_abe(u, d), d);
      m.min_rpa = std::min(m.min_rpa, r);
      m.max_rpa = std::max(m.max_rpa, r);
    }
  m.seconds = seconds_since(t0);
  return m;
}

Outcome mdi_identity(const MdiSweep& m) {
  Outcome o;
  o.pass = m.independent == m.checks && m.negative_failed == m.checks && m.checks >= 300 && m.seconds < kMdiSeconds;
  o.detail = std::to_string(m.independent) + "/" + std::to_string(m.checks) + " independent, max_dev=" +
             fmt(m.max_dev) + ", negative control failed " + std::to_string(m.negative_failed) + "/" +
             std::to_string(m.checks) + ", time=" + fmt(m.seconds) + "s";
  return o;
}

Outcome pa_consistency(const MdiSweep& m) {
  Outcome o;
  const double id = analysis::pa_rate(analysis::build_rho_abe(qm::identity(2), 1), 1);
  const double kr = analysis::key_rate(1.0, 0.0).r;
  o.pass = std::abs(id - 1.0) <= kPaTol && std::abs(id - kr) <= kPaTol && m.min_rpa >= -kPaTol &&
           m.max_rpa <= 1.0 + kPaTol;
  o.detail = "pa_rate(I)=" + fmt(id) + " key_rate(1,0)=" + fmt(kr) + " r_pa in [" + fmt(m.min_rpa) + "," +
             fmt(m.max_rpa) + "]";
  return o;
}

Outcome paired_equivalence() {
  Outcome o;
  std::size_t agree = 0, total = 0;
  double worst = 0;
  for (auto v : {proto::ProtocolVariant::TwoOp, proto::ProtocolVariant::FourOp})
    for (const auto& name : adv::forward_attack_names()) {
      auto cfg = session(100000, v, 11);
      auto bob_attack = adv::forward_attack(name);
      const auto b = analysis::estimate_stats(proto::run_session(cfg, bob_attack));
      cfg.locus = proto::MeasurementLocus::EveMeasures;
      auto eve_attack = adv::combine(adv::forward_attack(name), adv::eve_measure_in_bob_basis());
      const auto e = analysis::estimate_stats(proto::run_session(cfg, eve_attack));
      const double xi_bound = kSigmas * std::hypot(b.xi_sigma(), e.xi_sigma());
      const double e_bound = kSigmas * std::hypot(b.e_sigma(), e.e_sigma());
      const double dxi = std::abs(b.xi - e.xi), de = std::abs(b.e - e.e);
      const bool ok = dxi <= xi_bound && de <= e_bound;
      if (!ok) o.detail += "[" + std::string(proto::to_string(v)) + " " + name + " disagrees] ";
      worst = std::max({worst, xi_bound > 0 ? dxi / xi_bound : dxi, e_bound > 0 ? de / e_bound : de});
      agree += ok;
      ++total;
    }
  o.pass = agree == total;
  o.detail += std::to_string(agree) + "/" + std::to_string(total) + " attacks agree, worst |diff|/bound=" + fmt(worst);
  return o;
}

Outcome zero_leakage() {
  Outcome o;
  double max_info = 0, min_control = 1;
  std::size_t checked = 0;
  for (auto v : {proto::ProtocolVariant::TwoOp, proto::ProtocolVariant::FourOp}) {
    std::vector<adv::AttackStrategy> strategies;
    strategies.push_back(adv::eve_measure_in_bob_basis());
    for (const auto& name : adv::faked_state_names())
      strategies.push_back(adv::eve_faked_states(adv::faked_state_strategy(name)));
    for (const auto& s : strategies) {
      max_info = std::max(max_info, analysis::eve_information(s, v));
      ++checked;
    }
    min_control = std::min(min_control, analysis::eve_information(strategies.front(), v, {true}));
  }
  o.pass = max_info <= kZeroLeakTol && std::abs(min_control - 1.0) <= kZeroLeakTol;
  o.detail = std::to_string(checked) + " strategies, max eve_information=" + fmt(max_info) +
             ", leaked-bit control=" + fmt(min_control);
  return o;
}

Outcome protocols_bc() {
  Outcome o;
  double worst = 0;
  for (const auto& name : adv::forward_attack_names()) {
    const auto c = analysis::compare_protocols_bc(adv::forward_attack(name).forward(), kBcTol);
    o.pass = o.pass && c.pass && c.max_deviation <= kBcTol;
    worst = std::max(worst, c.max_deviation);
  }
  o.detail = std::to_string(adv::forward_attack_names().size()) + " forward attacks, max deviation=" + fmt(worst);
  return o;
}

struct EndToEnd {
  BitString alice, bob;
  std::size_t length = 0;
  bool verified = false;
};

EndToEnd end_to_end_once(std::size_t n, double e, double xi, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 1);
  BitString a(n);
  for (auto& b : a) b = static_cast<std::uint8_t>(rng.bit());
  BitString b = a;
  for (auto& bit : b)
    if (rng.bernoulli(e)) bit ^= 1;
  Rng shared = Rng::derive(seed, 2);
  const auto rec = postproc::reconcile(a, b, e, shared);
  const std::uint64_t pa_seed = Rng::derive(seed, 3)();
  const std::size_t leak = rec.leaked_bits + rec.tag_bits;
  const auto fa = postproc::privacy_amplify(a, xi, leak, postproc::kDefaultMargin, pa_seed);
  const auto fb = postproc::privacy_amplify(rec.corrected_key, xi, leak, postproc::kDefaultMargin, pa_seed);
  return {fa.bits, fb.bits, fa.length, rec.verified};
}

Outcome key_agreement() {
  Outcome o;
  constexpr std::size_t n = 4096;
  constexpr double e = 0.03;
  // Channel fidelity estimate paired with the injected error rate.
  constexpr double xi = 0.94;
  const auto r1 = end_to_end_once(n, e, xi, 77);
  const auto r2 = end_to_end_once(n, e, xi, 77);
  const double bound = n * (1 - h(xi));
  o.pass = r1.verified && !r1.alice.empty() && r1.alice == r1.bob && r1.length <= bound && r1.alice == r2.alice &&
           r1.bob == r2.bob;
  o.detail = "final length " + std::to_string(r1.length) + " <= " + fmt(bound) +
             (r1.alice == r1.bob ? ", keys identical" : ", keys differ") +
             (r1.alice == r2.alice ? ", deterministic" : ", not deterministic");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Runs `command` into two fresh directories and compares every artifact.
bool identical_reruns(const std::string& tag, const std::function<void(const fs::path&)>& command,
                      std::size_t& files) {
  const fs::path root = fs::temp_directory_path() / "dqkd_acceptance";
  const fs::path a = root / (tag + "_a"), b = root / (tag + "_b");
  fs::remove_all(a);
  fs::remove_all(b);
  command(a);
  command(b);
  if (!fs::exists(a)) return false;
  bool same = true;
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    same = same && fs::exists(b / name) && slurp(a / name) == slurp(b / name);
    ++n;
  }
  for (const auto& entry : fs::directory_iterator(b)) same = same && fs::exists(a / entry.path().filename());
  files += n;
  return same && n > 0;
}

Outcome determinism() {
  Outcome o;
  std::ostringstream log, out;
  std::size_t files = 0;
  std::vector<std::string> failed;
  const fs::path configs = fs::path(DQKD_SOURCE_DIR) / "configs";
  for (const auto& entry : fs::directory_iterator(configs)) {
    const auto name = entry.path().stem().string();
    const bool ok = identical_reruns("run_" + name, [&](const fs::path& dir) {
      cli::cmd_run(entry.path().string(), {{"protocol.n_rounds", "5000"}, {"output.dir", dir.string()}}, log);
    }, files);
    if (!ok) failed.push_back("run " + name);
  }
  if (!identical_reruns("verify_mdi", [&](const fs::path& dir) {
        cli::VerifyMdiOptions v;
        v.trials = 10;
        v.out_dir = dir.string();
        cli::cmd_verify_mdi(v, log);
      }, files))
    failed.push_back("verify-mdi");
  if (!identical_reruns("attack_suite", [&](const fs::path& dir) {
        cli::AttackSuiteOptions s;
        s.n_rounds = 3000;
        s.out_dir = dir.string();
        cli::cmd_attack_suite(s, log);
      }, files))
    failed.push_back("attack-suite");
  const fs::path src = fs::temp_directory_path() / "dqkd_acceptance" / "analyze_src";
  fs::remove_all(src);
  cli::RunConfig rc;
  rc.session.n_rounds = 3000;
  rc.forward_attack = "intercept-resend-x";
  rc.out_dir = src.string();
  cli::cmd_run(rc, log);
  if (!identical_reruns("analyze", [&](const fs::path& dir) {
        cli::cmd_analyze((src / "transcript.jsonl").string(), dir.string(), out, log);
      }, files))
    failed.push_back("analyze");
  o.pass = failed.empty();
  o.detail = std::to_string(files) + " artifacts compared";
  for (const auto& f : failed) o.detail += ", differs: " + f;
  return o;
}

}  // namespace

int main() {
  std::printf("dqkd acceptance\n");
  int failures = 0;
  auto report = [&](int id, const char* title, const Outcome& o) {
    std::printf("[%s] %2d %-34s %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "noiseless baseline", noiseless_baseline());
  report(2, "intercept-resend detection", intercept_resend());
  report(3, "encoding table", encoding_table());
  const MdiSweep sweep = mdi_sweep();
  report(4, "basis independence", mdi_identity(sweep));
  report(5, "privacy-amplification rate", pa_consistency(sweep));
  report(6, "Bob/Eve measurement equivalence", paired_equivalence());
  report(7, "zero-leakage announcement", zero_leakage());
  report(8, "protocol (b) equals (c)", protocols_bc());
  report(9, "end-to-end key agreement", key_agreement());
  report(10, "determinism", determinism());

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
