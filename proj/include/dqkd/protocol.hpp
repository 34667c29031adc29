#pragma once

// Bob/Alice round logic and session drivers for the two-way four-state
// protocols:
//   TwoOp   - Alice encodes with I (bit 0) or Y (bit 1).
//   FourOp  - Alice encodes with I, X, Y or Z; the key bit follows from the
//             op and Bob's basis (key_bit_from_table).
//   Bb84Otp - BB84 on the forward line, classical one-time pad backwards.
// In the EveMeasures locus Bob's detector belongs to Eve: after Alice has
// received the forward qubit, Bob's basis is released to Eve, who measures
// (or pretends to) and announces a click outcome.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dqkd/adversary.hpp"
#include "dqkd/bits.hpp"
#include "dqkd/qmath.hpp"
#include "dqkd/rng.hpp"

namespace dqkd::proto {

enum class ProtocolVariant : std::uint8_t { TwoOp, FourOp, Bb84Otp };
enum class MeasurementLocus : std::uint8_t { BobMeasures, EveMeasures };
enum class Mode : std::uint8_t { Check, Encode };

std::string_view to_string(ProtocolVariant v);
std::string_view to_string(MeasurementLocus l);
std::string_view to_string(Mode m);
std::optional<ProtocolVariant> parse_variant(std::string_view s);
std::optional<MeasurementLocus> parse_locus(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);

struct SessionConfig {
  std::size_t n_rounds = 10000;
  double p_check = 0.5;
  double disclose_fraction = 0.1;
  std::uint64_t seed = 1;
  ProtocolVariant variant = ProtocolVariant::TwoOp;
  MeasurementLocus locus = MeasurementLocus::BobMeasures;

  /// Throws std::invalid_argument unless n_rounds > 0 and both fractions lie
  /// strictly inside (0, 1).
  void validate() const;
};

struct RoundRecord {
  std::size_t index = 0;
  qm::Basis bob_basis = qm::Basis::Z;
  int bob_bit = 0;
  Mode mode = Mode::Encode;
  std::optional<qm::Basis> alice_check_basis;
  std::optional<int> alice_check_outcome;
  std::optional<qm::PauliOp> alice_op;
  std::optional<int> alice_key_bit;
  /// Bob's detector click, Eve's announcement, or (Bb84Otp) the public
  /// one-time-pad bit.
  std::optional<adv::ClickOutcome> announced_outcome;
  std::optional<int> bob_decoded_bit;
  bool disclosed = false;

  qm::Bb84State bob_state() const { return qm::make_state(bob_basis, bob_bit); }
  bool operator==(const RoundRecord&) const = default;
};

struct LossLedger {
  std::size_t no_click = 0;
  std::size_t double_click = 0;
  bool operator==(const LossLedger&) const = default;
};

struct Transcript {
  SessionConfig config;
  std::vector<RoundRecord> rounds;
  /// Encode-mode, undisclosed, conclusive rounds in index order.
  BitString alice_raw_key;
  BitString bob_raw_key;
  std::vector<std::size_t> key_rounds;
  LossLedger losses;
};

/// Rebuilds raw keys, their round map and the loss ledger from rounds.
void assemble_keys(Transcript& t);

/// Per-round random streams, one per role.
enum class Stream : std::uint64_t { Bob = 1, Alice = 2, Eve = 3, Return = 4 };

inline Rng stream_rng(std::uint64_t seed, std::size_t round, Stream s) {
  return Rng::derive(seed, round, static_cast<std::uint64_t>(s));
}

struct Preparation {
  qm::Bb84State state;
  qm::PureState ket;
};

Preparation bob_prepare(Rng& rng);

struct ModeDecision {
  Mode mode;
  std::optional<qm::Basis> check_basis;
  std::optional<int> check_outcome;
};

/// Alice's receipt: check mode with probability config.p_check (measuring the
/// qubit in a uniformly random basis), encode mode otherwise. p_check is not
/// range-checked here, so tests may pin it to 0 or 1.
ModeDecision alice_receive(const adv::LineState& received, Rng& rng, const SessionConfig& config);

struct Encoding {
  qm::PauliOp op;
  adv::LineState returned;
};

/// Draws Alice's op uniformly from the variant's set and applies it to the
/// qubit. Throws std::invalid_argument for Bb84Otp.
Encoding alice_encode(ProtocolVariant variant, const adv::LineState& received, Rng& rng);

/// Key bit for a four-op encoding given Bob's basis:
///   X basis: I, X -> 0; Z, Y -> 1.   Z basis: I, Z -> 0; X, Y -> 1.
int key_bit_from_table(qm::Basis basis, qm::PauliOp op);

/// Key bit implied by an op in the given variant (TwoOp ignores the basis).
int key_bit(ProtocolVariant variant, qm::Basis basis, qm::PauliOp op);

constexpr int bob_decode(int prepared_bit, int outcome_bit) { return prepared_bit ^ outcome_bit; }

/// Order of externally visible events within a round, for instrumentation.
enum class RoundEvent : std::uint8_t {
  BobPrepared,
  ForwardDelivered,
  AliceReceived,
  BackwardDelivered,
  BasisReleased,
  OutcomeAnnounced,
};

class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_event(std::size_t round, RoundEvent event) = 0;
};

/// Runs config.n_rounds rounds. Randomness comes from per-round streams
/// derived from config.seed, so identical configs give identical
/// transcripts and rounds line up across loci. Dispatches Bb84Otp to
/// run_bb84_otp_session. Throws std::invalid_argument for an invalid config
/// or an attack that requires the EveMeasures locus under BobMeasures.
Transcript run_session(const SessionConfig& config, adv::AttackStrategy& attack,
                       const adv::DetectorModel& detector = adv::DetectorModel::ideal(),
                       SessionObserver* observer = nullptr);

/// Forward BB84 with Alice measuring in Bob's (released) basis, then a public
/// announcement of key XOR measured bit. Eve's forward attack applies; there
/// is no quantum backward line.
Transcript run_bb84_otp_session(const SessionConfig& config, adv::AttackStrategy& forward_attack,
                                SessionObserver* observer = nullptr);
Transcript run_bb84_otp_session(const SessionConfig& config);

}  // namespace dqkd::proto
