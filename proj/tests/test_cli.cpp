#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dqkd/cli.hpp"

using namespace dqkd;
using namespace dqkd::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dqkd_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

RunConfig small(const fs::path& out, std::size_t n = 2000) {
  RunConfig c;
  c.session.n_rounds = n;
  c.session.seed = 7;
  c.out_dir = out.string();
  return c;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::istringstream is(slurp(p));
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config_text(
      "# comment\n"
      "protocol.n_rounds = 1234\n"
      "  protocol.p_check=0.25   # trailing\n"
      "protocol.variant = four_op\n"
      "protocol.locus = eve_measures\n"
      "attack.forward = intercept-resend-z\n"
      "attack.announcer = random-bit\n"
      "detector.eta0 = 0.5\n"
      "output.formats = csv\n"
      "postproc.margin = 10\n"
      "\n");
  CHECK(c.session.n_rounds == 1234);
  CHECK(c.session.p_check == 0.25);
  CHECK(c.session.variant == proto::ProtocolVariant::FourOp);
  CHECK(c.session.locus == proto::MeasurementLocus::EveMeasures);
  CHECK(c.forward_attack == "intercept-resend-z");
  CHECK(c.announcer == "random-bit");
  CHECK(c.eta0 == 0.5);
  CHECK(!c.write_json);
  CHECK(c.write_csv);
  CHECK(c.margin == 10);
  CHECK_NOTHROW(c.validate());
  CHECK(c.attack_label() == "intercept-resend-z+random-bit");

  const auto base = parse_config_text("protocol.seed = 5\n");
  const auto layered = parse_config_text("protocol.n_rounds = 10\n", base);
  CHECK(layered.session.seed == 5);
  CHECK(layered.session.n_rounds == 10);
}

TEST_CASE("config errors name the problem") {
  auto msg = config_error("protocol.n_rounds = 10\nprotocol.bogus = 1\n");
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("protocol.n_rounds") != std::string::npos);

  msg = config_error("attack.forward = teleport\n");
  CHECK(msg.find("teleport") != std::string::npos);
  CHECK(msg.find("intercept-resend-random") != std::string::npos);

  msg = config_error("protocol.locus = eve_measures\nattack.announcer = psychic\n");
  CHECK(msg.find("always-bit0") != std::string::npos);

  msg = config_error("detector.blinded = true\ndetector.override = nope\n");
  CHECK(msg.find("nope") != std::string::npos);

  CHECK(config_error("protocol.n_rounds = ten\n").find("line 1") != std::string::npos);
  CHECK(config_error("protocol.n_rounds\n").find("expected key = value") != std::string::npos);
  CHECK(config_error("protocol.p_check = 1.5\n").size() > 0);
  CHECK(config_error("attack.announcer = always-bit1\n").find("eve_measures") != std::string::npos);
  CHECK(config_error("protocol.variant = bb84_otp\nprotocol.locus = eve_measures\n").find("bb84_otp") !=
        std::string::npos);
  CHECK(config_error("attack.forward = unitary-haar\nattack.ancilla_dim = 3\n").find("power of two") !=
        std::string::npos);
  CHECK(config_error("detector.blinded = true\n").find("detector.override") != std::string::npos);
  CHECK(config_error("output.formats = xml\n").size() > 0);
  CHECK(config_error("protocol.n_rounds = 10\n").empty());

  CHECK_THROWS_AS(load_config("/nonexistent/dqkd.cfg", {}), ConfigError);
}

TEST_CASE("overrides apply on top of the file") {
  const auto dir = scratch("overrides");
  fs::create_directories(dir);
  std::ofstream(dir / "a.cfg") << "protocol.n_rounds = 100\nprotocol.seed = 3\n";
  const auto c = load_config((dir / "a.cfg").string(), {{"protocol.seed", "9"}, {"attack.forward", "unitary-cnot"}});
  CHECK(c.session.n_rounds == 100);
  CHECK(c.session.seed == 9);
  CHECK(c.forward_attack == "unitary-cnot");
  CHECK_THROWS_AS(load_config((dir / "a.cfg").string(), {{"protocol.nope", "1"}}), ConfigError);
}

TEST_CASE("run: noiseless summary row") {
  const auto dir = scratch("noiseless");
  std::ostringstream log;
  CHECK(cmd_run(small(dir), log) == kExitOk);
  const auto lines = csv_lines(dir / "summary.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "# seed=7");
  CHECK(lines[1] == kSummaryHeader);
  CHECK(lines[2] == "two_op,bob_measures,none,2000,1,1,1,1,1,0,1,false");
  CHECK(fs::exists(dir / "transcript.jsonl"));
  CHECK(fs::exists(dir / "stats.json"));
  CHECK(slurp(dir / "alice_key.hex") == slurp(dir / "bob_key.hex"));

  const auto stats = json::parse(slurp(dir / "stats.json"));
  CHECK(stats["seed"] == 7);
  CHECK(stats["abort"] == false);
  CHECK(stats["postproc"]["verified"] == true);
  const auto acc = json::parse(slurp(dir / "key_accounting.json"));
  CHECK(acc["final_length"].get<std::size_t>() > 0);
  CHECK(acc["final_length"].get<std::size_t>() <= acc["n_raw"].get<std::size_t>());
  CHECK(log.str().find(" ok") != std::string::npos);
}

TEST_CASE("run: intercept-resend aborts with exit 2") {
  const auto dir = scratch("ir");
  auto c = small(dir, 20000);
  c.forward_attack = "intercept-resend-random";
  std::ostringstream log;
  CHECK(cmd_run(c, log) == kExitAbort);
  const auto lines = csv_lines(dir / "summary.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[2].ends_with(",true"));
  CHECK(!fs::exists(dir / "alice_key.hex"));
  CHECK(json::parse(slurp(dir / "stats.json"))["abort"] == true);
}

TEST_CASE("run: usage errors exit 1") {
  std::ostringstream log;
  CHECK(cmd_run("/nonexistent/dqkd.cfg", {}, log) == kExitUsage);
  auto c = small(scratch("bad"));
  c.forward_attack = "teleport";
  CHECK(cmd_run(c, log) == kExitUsage);
  CHECK(log.str().find("teleport") != std::string::npos);
}

TEST_CASE("run: too few rounds is an abort") {
  const auto dir = scratch("tiny");
  std::ostringstream log;
  CHECK(cmd_run(small(dir, 3), log) == kExitAbort);
  CHECK(fs::exists(dir / "transcript.jsonl"));
}

TEST_CASE("run: reruns are byte-identical") {
  for (const char* attack : {"none", "intercept-resend-z", "unitary-haar"}) {
    CAPTURE(attack);
    const auto a = scratch(std::string("rerun_a_") + attack), b = scratch(std::string("rerun_b_") + attack);
    auto ca = small(a), cb = small(b);
    ca.forward_attack = cb.forward_attack = attack;
    std::ostringstream log;
    cmd_run(ca, log);
    cmd_run(cb, log);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      REQUIRE(fs::exists(b / name));
      CHECK(slurp(a / name) == slurp(b / name));
      ++compared;
    }
    CHECK(compared >= 3);
  }
}

TEST_CASE("run: summary CSV matches golden files") {
  const fs::path golden = fs::path(DQKD_SOURCE_DIR) / "tests" / "golden";
  {
    const auto dir = scratch("golden_noiseless");
    std::ostringstream log;
    cmd_run(small(dir), log);
    CHECK(slurp(dir / "summary.csv") == slurp(golden / "summary_noiseless_seed7.csv"));
  }
  {
    const auto dir = scratch("golden_ir");
    auto c = small(dir);
    c.forward_attack = "intercept-resend-z";
    std::ostringstream log;
    cmd_run(c, log);
    CHECK(slurp(dir / "summary.csv") == slurp(golden / "summary_intercept_resend_z_seed7.csv"));
  }
}

TEST_CASE("run: shipped configs parse") {
  for (const auto& entry : fs::directory_iterator(fs::path(DQKD_SOURCE_DIR) / "configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string(), {}).validate());
  }
}

TEST_CASE("verify-mdi") {
  VerifyMdiOptions o;
  o.trials = 10;
  o.out_dir = scratch("mdi").string();
  std::ostringstream log;
  CHECK(cmd_verify_mdi(o, log) == kExitOk);
  const auto report = json::parse(slurp(fs::path(o.out_dir) / "verify_mdi.json"));
  CHECK(report["n_checks"] == 30);
  CHECK(report["n_basis_independent"] == 30);
  CHECK(report["verdict"] == "pass");
  CHECK(report["max_deviation"].get<double>() <= 1e-12);
  CHECK(csv_lines(fs::path(o.out_dir) / "verify_mdi.csv").size() == 32);

  o.negative_control = true;
  o.out_dir = scratch("mdi_neg").string();
  CHECK(cmd_verify_mdi(o, log) == kExitOk);
  CHECK(json::parse(slurp(fs::path(o.out_dir) / "verify_mdi.json"))["n_basis_independent"] == 0);

  o.negative_control = false;
  o.trials = 0;
  CHECK(cmd_verify_mdi(o, log) == kExitUsage);
  o.trials = 1;
  o.ancilla_dims = {};
  CHECK(cmd_verify_mdi(o, log) == kExitUsage);
  o.ancilla_dims = {2};
  o.tol = 0;
  CHECK(cmd_verify_mdi(o, log) == kExitUsage);

  o.tol = 1e-12;
  const auto a = scratch("mdi_a"), b = scratch("mdi_b");
  o.out_dir = a.string();
  cmd_verify_mdi(o, log);
  o.out_dir = b.string();
  cmd_verify_mdi(o, log);
  CHECK(slurp(a / "verify_mdi.json") == slurp(b / "verify_mdi.json"));
  CHECK(slurp(a / "verify_mdi.csv") == slurp(b / "verify_mdi.csv"));
}

TEST_CASE("attack-suite at small n") {
  AttackSuiteOptions o;
  o.n_rounds = 4000;
  o.out_dir = scratch("suite").string();
  std::ostringstream log;
  CHECK(cmd_attack_suite(o, log) == kExitOk);
  const auto report = json::parse(slurp(fs::path(o.out_dir) / "attack_suite.json"));
  CHECK(report["verdict"]["pass"] == true);
  CHECK(report["paired"].size() == 2 * adv::forward_attack_names().size());
  CHECK(report["announcers"].size() == 2 * (1 + adv::faked_state_names().size()));
  const auto lines = csv_lines(fs::path(o.out_dir) / "attack_suite.csv");
  CHECK(lines[0] == "# seed=1");
  CHECK(lines.size() == 2 + 2 * adv::forward_attack_names().size());

  o.n_rounds = 0;
  CHECK(cmd_attack_suite(o, log) == kExitUsage);
}

TEST_CASE("analyze reproduces run statistics") {
  const auto dir = scratch("analyze");
  auto c = small(dir, 5000);
  c.forward_attack = "intercept-resend-breidbart";
  std::ostringstream log;
  cmd_run(c, log);
  std::ostringstream out;
  const int code = cmd_analyze((dir / "transcript.jsonl").string(), std::nullopt, out, log);
  const auto analyzed = json::parse(out.str());
  const auto stats = json::parse(slurp(dir / "stats.json"));
  CHECK(analyzed["stats"] == stats["stats"]);
  CHECK(analyzed["key_rate"] == stats["key_rate"]);
  CHECK(analyzed["seed"] == 7);
  CHECK(code == (analyzed["abort"].get<bool>() ? kExitAbort : kExitOk));

  const auto out_dir = scratch("analyze_out");
  CHECK(cmd_analyze((dir / "transcript.jsonl").string(), out_dir.string(), out, log) == code);
  CHECK(fs::exists(out_dir / "analysis.json"));

  CHECK(cmd_analyze("/nonexistent/t.jsonl", std::nullopt, out, log) == kExitUsage);
}

TEST_CASE("format_number and atomic writes") {
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(0.25) == "0.25");
  const auto dir = scratch("atomic");
  write_file_atomic((dir / "sub" / "x.txt").string(), "hello");
  CHECK(slurp(dir / "sub" / "x.txt") == "hello");
  write_file_atomic((dir / "sub" / "x.txt").string(), "bye");
  CHECK(slurp(dir / "sub" / "x.txt") == "bye");
}
