#include "dqkd/transcript_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace dqkd::proto {

using json = nlohmann::ordered_json;

namespace {

inline constexpr const char* kFormat = "dqkd-transcript/1";

template <typename T, typename F>
json opt(const std::optional<T>& v, F&& f) {
  return v ? json(f(*v)) : json(nullptr);
}

template <typename T, typename Parse>
T parse_enum(const json& j, const char* field, Parse&& parse) {
  const auto s = j.at(field).get<std::string>();
  if (auto v = parse(s)) return *v;
  throw std::runtime_error(std::string("bad value for '") + field + "': " + s);
}

template <typename T, typename Parse>
std::optional<T> parse_opt_enum(const json& j, const char* field, Parse&& parse) {
  if (j.at(field).is_null()) return std::nullopt;
  return parse_enum<T>(j, field, parse);
}

std::optional<int> opt_bit(const json& j, const char* field) {
  const auto& v = j.at(field);
  if (v.is_null()) return std::nullopt;
  const int b = v.get<int>();
  if (b != 0 && b != 1) throw std::runtime_error(std::string("bit field '") + field + "' out of range");
  return b;
}

}  // namespace

json config_to_json(const SessionConfig& c) {
  json j;
  j["n_rounds"] = c.n_rounds;
  j["p_check"] = c.p_check;
  j["disclose_fraction"] = c.disclose_fraction;
  j["seed"] = c.seed;
  j["variant"] = to_string(c.variant);
  j["locus"] = to_string(c.locus);
  return j;
}

SessionConfig config_from_json(const json& j) {
  SessionConfig c;
  c.n_rounds = j.at("n_rounds").get<std::size_t>();
  c.p_check = j.at("p_check").get<double>();
  c.disclose_fraction = j.at("disclose_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = parse_enum<ProtocolVariant>(j, "variant", parse_variant);
  c.locus = parse_enum<MeasurementLocus>(j, "locus", parse_locus);
  return c;
}

json round_to_json(const RoundRecord& r) {
  json j;
  j["index"] = r.index;
  j["bob_basis"] = qm::to_string(r.bob_basis);
  j["bob_bit"] = r.bob_bit;
  j["mode"] = to_string(r.mode);
  j["alice_check_basis"] = opt(r.alice_check_basis, [](qm::Basis b) { return qm::to_string(b); });
  j["alice_check_outcome"] = opt(r.alice_check_outcome, [](int b) { return b; });
  j["alice_op"] = opt(r.alice_op, [](qm::PauliOp op) { return qm::to_string(op); });
  j["alice_key_bit"] = opt(r.alice_key_bit, [](int b) { return b; });
  j["announced_outcome"] = opt(r.announced_outcome, [](adv::ClickOutcome c) { return adv::to_string(c); });
  j["bob_decoded_bit"] = opt(r.bob_decoded_bit, [](int b) { return b; });
  j["disclosed"] = r.disclosed;
  return j;
}

RoundRecord round_from_json(const json& j) {
  RoundRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.bob_basis = parse_enum<qm::Basis>(j, "bob_basis", qm::parse_basis);
  r.bob_bit = j.at("bob_bit").get<int>();
  if (r.bob_bit != 0 && r.bob_bit != 1) throw std::runtime_error("bob_bit out of range");
  r.mode = parse_enum<Mode>(j, "mode", parse_mode);
  r.alice_check_basis = parse_opt_enum<qm::Basis>(j, "alice_check_basis", qm::parse_basis);
  r.alice_check_outcome = opt_bit(j, "alice_check_outcome");
  r.alice_op = parse_opt_enum<qm::PauliOp>(j, "alice_op", qm::parse_pauli);
  r.alice_key_bit = opt_bit(j, "alice_key_bit");
  r.announced_outcome = parse_opt_enum<adv::ClickOutcome>(j, "announced_outcome", adv::parse_click);
  r.bob_decoded_bit = opt_bit(j, "bob_decoded_bit");
  r.disclosed = j.at("disclosed").get<bool>();
  if (r.mode == Mode::Check && (!r.alice_check_basis || !r.alice_check_outcome || r.alice_op))
    throw std::runtime_error("check round " + std::to_string(r.index) + " has inconsistent fields");
  if (r.mode == Mode::Encode && (r.alice_check_basis || r.alice_check_outcome))
    throw std::runtime_error("encode round " + std::to_string(r.index) + " carries check fields");
  return r;
}

void write_transcript(std::ostream& os, const Transcript& t) {
  json header;
  header["type"] = "header";
  header["format"] = kFormat;
  header["seed"] = t.config.seed;
  header["config"] = config_to_json(t.config);
  os << header.dump() << '\n';
  for (const auto& r : t.rounds) os << round_to_json(r).dump() << '\n';
}

Transcript read_transcript(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty transcript");
  Transcript t;
  try {
    const json header = json::parse(line);
    if (header.at("type") != "header" || header.at("format") != kFormat)
      throw std::runtime_error("missing transcript header");
    t.config = config_from_json(header.at("config"));
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      t.rounds.push_back(round_from_json(json::parse(line)));
      if (t.rounds.back().index != t.rounds.size() - 1)
        throw std::runtime_error("round index out of sequence at line " + std::to_string(lineno));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed transcript: ") + e.what());
  }
  assemble_keys(t);
  return t;
}

}  // namespace dqkd::proto
