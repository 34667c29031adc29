#include "dqkd/protocol.hpp"

#include <stdexcept>

namespace dqkd::proto {

using adv::ClickOutcome;
using adv::LineState;
using qm::Basis;
using qm::PauliOp;

std::string_view to_string(ProtocolVariant v) {
  switch (v) {
    case ProtocolVariant::TwoOp: return "two_op";
    case ProtocolVariant::FourOp: return "four_op";
    case ProtocolVariant::Bb84Otp: return "bb84_otp";
  }
  return "?";
}

std::string_view to_string(MeasurementLocus l) {
  return l == MeasurementLocus::BobMeasures ? "bob_measures" : "eve_measures";
}

std::string_view to_string(Mode m) { return m == Mode::Check ? "check" : "encode"; }

std::optional<ProtocolVariant> parse_variant(std::string_view s) {
  for (auto v : {ProtocolVariant::TwoOp, ProtocolVariant::FourOp, ProtocolVariant::Bb84Otp})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<MeasurementLocus> parse_locus(std::string_view s) {
  for (auto l : {MeasurementLocus::BobMeasures, MeasurementLocus::EveMeasures})
    if (to_string(l) == s) return l;
  return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "check") return Mode::Check;
  if (s == "encode") return Mode::Encode;
  return std::nullopt;
}

void SessionConfig::validate() const {
  if (n_rounds == 0) throw std::invalid_argument("n_rounds must be positive");
  if (!(p_check > 0.0 && p_check < 1.0)) throw std::invalid_argument("p_check must lie in (0, 1)");
  if (!(disclose_fraction > 0.0 && disclose_fraction < 1.0))
    throw std::invalid_argument("disclose_fraction must lie in (0, 1)");
}

void assemble_keys(Transcript& t) {
  t.alice_raw_key.clear();
  t.bob_raw_key.clear();
  t.key_rounds.clear();
  t.losses = {};
  for (const auto& r : t.rounds) {
    if (r.mode != Mode::Encode) continue;
    if (r.announced_outcome == ClickOutcome::NoClick) ++t.losses.no_click;
    if (r.announced_outcome == ClickOutcome::DoubleClick) ++t.losses.double_click;
    if (r.disclosed || !r.bob_decoded_bit || !r.alice_key_bit) continue;
    t.alice_raw_key.push_back(static_cast<std::uint8_t>(*r.alice_key_bit));
    t.bob_raw_key.push_back(static_cast<std::uint8_t>(*r.bob_decoded_bit));
    t.key_rounds.push_back(r.index);
  }
}

Preparation bob_prepare(Rng& rng) {
  const qm::Bb84State s = qm::kAllStates[rng.below(4)];
  return {s, qm::bb84_ket(s)};
}

ModeDecision alice_receive(const LineState& received, Rng& rng, const SessionConfig& config) {
  if (!rng.bernoulli(config.p_check)) return {Mode::Encode, std::nullopt, std::nullopt};
  const Basis b = rng.bit() ? Basis::X : Basis::Z;
  const auto dims = received.dims();
  const auto m = qm::measure_projective(received.rho, qm::qubit_basis(b), dims, 0, rng);
  return {Mode::Check, b, m.outcome};
}

Encoding alice_encode(ProtocolVariant variant, const LineState& received, Rng& rng) {
  PauliOp op;
  switch (variant) {
    case ProtocolVariant::TwoOp: op = rng.bit() ? PauliOp::Y : PauliOp::I; break;
    case ProtocolVariant::FourOp: op = qm::kAllOps[rng.below(4)]; break;
    default: throw std::invalid_argument("alice_encode: Bb84Otp has no quantum encoding");
  }
  return {op, received.with_qubit_unitary(qm::pauli_matrix(op))};
}

int key_bit_from_table(Basis basis, PauliOp op) {
  if (op == PauliOp::I) return 0;
  if (op == PauliOp::Y) return 1;
  if (basis == Basis::X) return op == PauliOp::Z ? 1 : 0;
  return op == PauliOp::X ? 1 : 0;
}

int key_bit(ProtocolVariant variant, Basis basis, PauliOp op) {
  if (variant == ProtocolVariant::TwoOp) return op == PauliOp::Y ? 1 : 0;
  return key_bit_from_table(basis, op);
}

/// Runs rounds in order and is the only place Bob's basis is released.
class SessionDriver {
 public:
  SessionDriver(const SessionConfig& config, adv::AttackStrategy& attack, const adv::DetectorModel& detector,
                SessionObserver* observer)
      : config_(config), attack_(attack), detector_(detector), observer_(observer) {}

  Transcript run_two_way() {
    Transcript t{config_, {}, {}, {}, {}, {}};
    t.rounds.reserve(config_.n_rounds);
    for (std::size_t i = 0; i < config_.n_rounds; ++i) t.rounds.push_back(two_way_round(i));
    // Bob's bases are announced in bulk after all returned qubits are
    // measured; only then can Alice resolve four-op key bits.
    if (config_.variant == ProtocolVariant::FourOp)
      for (auto& r : t.rounds)
        if (r.alice_op) r.alice_key_bit = key_bit_from_table(r.bob_basis, *r.alice_op);
    assemble_keys(t);
    return t;
  }

  Transcript run_otp() {
    Transcript t{config_, {}, {}, {}, {}, {}};
    t.rounds.reserve(config_.n_rounds);
    for (std::size_t i = 0; i < config_.n_rounds; ++i) t.rounds.push_back(otp_round(i));
    assemble_keys(t);
    return t;
  }

 private:
  void emit(std::size_t round, RoundEvent e) {
    if (observer_) observer_->on_event(round, e);
  }

  // Shared forward half: preparation, Eve's forward attack, Alice's receipt.
  struct Forward {
    RoundRecord record;
    LineState line;
    ModeDecision decision;
  };

  Forward forward_half(std::size_t i, Rng& bob, Rng& alice, Rng& eve) {
    const Preparation prep = bob_prepare(bob);
    RoundRecord rec;
    rec.index = i;
    rec.bob_basis = qm::basis(prep.state);
    rec.bob_bit = qm::bit(prep.state);
    emit(i, RoundEvent::BobPrepared);

    LineState line = attack_.on_forward(LineState::qubit(prep.ket), i, eve);
    emit(i, RoundEvent::ForwardDelivered);

    const ModeDecision d = alice_receive(line, alice, config_);
    emit(i, RoundEvent::AliceReceived);
    rec.mode = d.mode;
    rec.alice_check_basis = d.check_basis;
    rec.alice_check_outcome = d.check_outcome;
    return {rec, std::move(line), d};
  }

  RoundRecord two_way_round(std::size_t i) {
    Rng bob = stream_rng(config_.seed, i, Stream::Bob);
    Rng alice = stream_rng(config_.seed, i, Stream::Alice);
    Rng eve = stream_rng(config_.seed, i, Stream::Eve);
    Rng ret = stream_rng(config_.seed, i, Stream::Return);

    auto [rec, line, decision] = forward_half(i, bob, alice, eve);
    if (decision.mode == Mode::Check) return rec;

    Encoding enc = alice_encode(config_.variant, line, alice);
    rec.alice_op = enc.op;
    if (config_.variant == ProtocolVariant::TwoOp) rec.alice_key_bit = key_bit(config_.variant, rec.bob_basis, enc.op);
    rec.disclosed = alice.bernoulli(config_.disclose_fraction);

    LineState back = attack_.on_backward(std::move(enc.returned), i, eve);
    emit(i, RoundEvent::BackwardDelivered);

    // The return-line generator drives whichever device reads the qubit, so
    // an honest Eve and an ideal detector see the same draws.
    ClickOutcome click;
    if (config_.locus == MeasurementLocus::BobMeasures) {
      click = adv::detector_click(detector_, back, rec.bob_basis, ret);
    } else {
      const adv::ReleasedBasis released(rec.bob_basis);
      emit(i, RoundEvent::BasisReleased);
      click = attack_.announce(back, released, i, ret);
      emit(i, RoundEvent::OutcomeAnnounced);
    }
    rec.announced_outcome = click;
    if (auto b = adv::click_bit(click)) {
      rec.bob_decoded_bit = bob_decode(rec.bob_bit, *b);
    } else if (click == ClickOutcome::DoubleClick) {
      rec.bob_decoded_bit = bob_decode(rec.bob_bit, ret.bit());
    }
    return rec;
  }

  RoundRecord otp_round(std::size_t i) {
    Rng bob = stream_rng(config_.seed, i, Stream::Bob);
    Rng alice = stream_rng(config_.seed, i, Stream::Alice);
    Rng eve = stream_rng(config_.seed, i, Stream::Eve);

    auto [rec, line, decision] = forward_half(i, bob, alice, eve);
    if (decision.mode == Mode::Check) return rec;

    // Alice holds the qubit until Bob's basis is public, then measures in it.
    emit(i, RoundEvent::BasisReleased);
    const auto dims = line.dims();
    const int m = qm::measure_projective(line.rho, qm::qubit_basis(rec.bob_basis), dims, 0, alice).outcome;
    const int a = alice.bit();
    rec.alice_key_bit = a;
    rec.disclosed = alice.bernoulli(config_.disclose_fraction);
    const int pad = a ^ m;
    rec.announced_outcome = adv::click_from_bit(pad);
    emit(i, RoundEvent::OutcomeAnnounced);
    rec.bob_decoded_bit = bob_decode(rec.bob_bit, pad);
    return rec;
  }

  const SessionConfig& config_;
  adv::AttackStrategy& attack_;
  const adv::DetectorModel& detector_;
  SessionObserver* observer_;
};

Transcript run_session(const SessionConfig& config, adv::AttackStrategy& attack,
                       const adv::DetectorModel& detector, SessionObserver* observer) {
  config.validate();
  if (config.variant == ProtocolVariant::Bb84Otp) return run_bb84_otp_session(config, attack, observer);
  if (attack.requires_eve_measures() && config.locus != MeasurementLocus::EveMeasures)
    throw std::invalid_argument("attack '" + attack.name() + "' requires the eve_measures locus");
  detector.validate();
  return SessionDriver(config, attack, detector, observer).run_two_way();
}

Transcript run_bb84_otp_session(const SessionConfig& config, adv::AttackStrategy& forward_attack,
                                SessionObserver* observer) {
  config.validate();
  if (config.variant != ProtocolVariant::Bb84Otp)
    throw std::invalid_argument("run_bb84_otp_session: variant must be bb84_otp");
  if (forward_attack.requires_eve_measures())
    throw std::invalid_argument("bb84_otp has no quantum backward line for '" + forward_attack.name() + "'");
  const auto ideal = adv::DetectorModel::ideal();
  return SessionDriver(config, forward_attack, ideal, observer).run_otp();
}

Transcript run_bb84_otp_session(const SessionConfig& config) {
  auto none = adv::attack_none();
  return run_bb84_otp_session(config, none);
}

}  // namespace dqkd::proto
