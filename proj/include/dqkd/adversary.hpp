#pragma once

// Adversaries and Bob-side detector models.
//
// An AttackStrategy bundles three parts: what Eve does to the forward qubit
// (Bob -> Alice), what she does to the backward qubit (Alice -> Bob), and,
// when she owns Bob's measurement device, which click outcome she announces.
// The callbacks only ever receive the travelling quantum system, the round
// index, Eve's own memory and (after Alice has received the qubit) Bob's
// released basis. Nothing else about the round is reachable from here.

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dqkd/qmath.hpp"
#include "dqkd/rng.hpp"

namespace dqkd::proto {
class SessionDriver;
}
namespace dqkd::analysis {
class AnnouncementEnumerator;
}

namespace dqkd::adv {

enum class ClickOutcome : std::uint8_t { Bit0, Bit1, NoClick, DoubleClick };

inline constexpr std::array<ClickOutcome, 4> kAllClicks = {ClickOutcome::Bit0, ClickOutcome::Bit1,
                                                           ClickOutcome::NoClick, ClickOutcome::DoubleClick};

std::string_view to_string(ClickOutcome c);
std::optional<ClickOutcome> parse_click(std::string_view s);
constexpr ClickOutcome click_from_bit(int b) { return b ? ClickOutcome::Bit1 : ClickOutcome::Bit0; }
constexpr std::optional<int> click_bit(ClickOutcome c) {
  if (c == ClickOutcome::Bit0) return 0;
  if (c == ClickOutcome::Bit1) return 1;
  return std::nullopt;
}

/// Quantum system on the line: Bob's qubit is factor 0, Eve's ancilla (if
/// she attached one; dimension 1 otherwise) is factor 1.
struct LineState {
  qm::DensityMatrix rho;
  std::size_t ancilla_dim = 1;

  static LineState qubit(const qm::PureState& psi);
  static LineState qubit(const qm::DensityMatrix& rho);

  std::array<std::size_t, 2> dims() const { return {2, ancilla_dim}; }
  qm::DensityMatrix qubit_marginal() const;
  /// `op` on Bob's qubit, identity on the ancilla.
  LineState with_qubit_unitary(const qm::Matrix& op) const;
};

/// Bob's basis after it has been made public. Only the session driver (once
/// Alice has received the forward qubit) and the offline enumerator can mint
/// one, so no adversary callback can ask for the basis earlier.
class ReleasedBasis {
 public:
  qm::Basis basis() const noexcept { return basis_; }

 private:
  explicit ReleasedBasis(qm::Basis b) noexcept : basis_(b) {}
  friend class dqkd::proto::SessionDriver;
  friend class dqkd::analysis::AnnouncementEnumerator;

  qm::Basis basis_;
};

/// Eve's classical record of one forward interception.
struct InterceptRecord {
  std::size_t round;
  std::string basis_label;
  int outcome;
};

/// Eve's private classical memory; it persists across rounds.
struct EveMemory {
  std::vector<InterceptRecord> intercepts;
};

/// Everything Eve can see when deciding what Bob's detector reports.
struct EveView {
  const LineState& returned;
  ReleasedBasis basis;
  std::size_t round;
  const EveMemory& memory;
};

/// Outcome probabilities indexed like kAllClicks.
using ClickDistribution = std::array<double, 4>;

ClickOutcome sample_click(const ClickDistribution& dist, Rng& rng);

/// One outcome of Eve's forward-line randomness: its probability, the record
/// she keeps ("" if none) and the state sent on to Alice.
struct ForwardBranch {
  double weight;
  std::string record;
  LineState state;
};

class ForwardAttack {
 public:
  virtual ~ForwardAttack() = default;
  virtual std::string name() const = 0;
  virtual LineState apply(LineState in, std::size_t round, EveMemory& memory, Rng& rng) = 0;
  /// Exact decomposition of apply() over Eve's randomness.
  virtual std::vector<ForwardBranch> branches(const LineState& in) const = 0;
  /// Branches summed with Eve's records forgotten.
  LineState channel(const LineState& in) const;
};

class BackwardAttack {
 public:
  virtual ~BackwardAttack() = default;
  virtual std::string name() const = 0;
  virtual LineState apply(LineState in, std::size_t round, EveMemory& memory, Rng& rng) = 0;
  virtual bool is_identity() const { return false; }
};

class Announcer {
 public:
  virtual ~Announcer() = default;
  virtual std::string name() const = 0;
  virtual ClickOutcome announce(const EveView& view, Rng& rng) const = 0;
  /// Exact outcome distribution, if this announcer has one.
  virtual std::optional<ClickDistribution> distribution(const EveView& view) const = 0;
};

class AttackStrategy {
 public:
  AttackStrategy(std::string name, std::unique_ptr<ForwardAttack> forward,
                 std::unique_ptr<BackwardAttack> backward, std::unique_ptr<Announcer> announcer,
                 bool requires_eve_measures);

  AttackStrategy(AttackStrategy&&) noexcept = default;
  AttackStrategy& operator=(AttackStrategy&&) noexcept = default;

  const std::string& name() const { return name_; }
  bool requires_eve_measures() const { return requires_eve_measures_; }

  LineState on_forward(LineState in, std::size_t round, Rng& rng);
  LineState on_backward(LineState in, std::size_t round, Rng& rng);
  ClickOutcome announce(const LineState& returned, ReleasedBasis basis, std::size_t round, Rng& rng);

  const ForwardAttack& forward() const { return *forward_; }
  const BackwardAttack& backward() const { return *backward_; }
  const Announcer& announcer() const { return *announcer_; }
  const EveMemory& memory() const { return memory_; }

  /// Forward and backward behaviour of `lines`, announcement behaviour of
  /// `announcing`.
  friend AttackStrategy combine(AttackStrategy lines, AttackStrategy announcing);

 private:
  std::string name_;
  std::unique_ptr<ForwardAttack> forward_;
  std::unique_ptr<BackwardAttack> backward_;
  std::unique_ptr<Announcer> announcer_;
  bool requires_eve_measures_;
  EveMemory memory_;
};

AttackStrategy combine(AttackStrategy lines, AttackStrategy announcing);

enum class BasisPolicy : std::uint8_t { RandomZX, FixedZ, FixedX, Breidbart };

std::string_view to_string(BasisPolicy p);
std::optional<BasisPolicy> parse_basis_policy(std::string_view s);

/// Identity on both lines; announcing, if ever asked, is an honest measurement.
AttackStrategy attack_none();

/// Forward-line intercept-resend: measure in a policy-chosen basis, resend the
/// eigenstate found, remember the result.
AttackStrategy attack_intercept_resend(BasisPolicy policy);

/// Forward-line joint unitary with a private ancilla prepared in its first
/// basis vector. Throws std::invalid_argument if `u_be` is not a unitary of
/// dimension 2 * ancilla_dim or ancilla_dim is not a power of two.
AttackStrategy attack_unitary_ancilla(const qm::Matrix& u_be, std::size_t ancilla_dim);

/// Eve holds Bob's detector and honestly measures the returned qubit in the
/// released basis.
AttackStrategy eve_measure_in_bob_basis();

/// Enumerable faked-state strategy: a named outcome distribution computed
/// from Eve's view.
struct FakedStateStrategy {
  std::string name;
  std::function<ClickDistribution(const EveView&)> distribution;
};

/// Eve holds Bob's detector and reports whatever `strategy` dictates.
AttackStrategy eve_faked_states(FakedStateStrategy strategy);
/// Sampling-only variant; such strategies cannot be enumerated exactly.
AttackStrategy eve_faked_states(std::string name, std::function<ClickOutcome(const EveView&, Rng&)> sampler);

/// Registry names accepted by faked_state_strategy().
std::vector<std::string> faked_state_names();
/// Throws std::invalid_argument listing the known names on a miss.
FakedStateStrategy faked_state_strategy(std::string_view name);

/// Registry of forward attacks used by the attack suite and the CLI:
/// none, intercept-resend-{random,z,x,breidbart}, unitary-cnot.
std::vector<std::string> forward_attack_names();
AttackStrategy forward_attack(std::string_view name);

qm::Matrix cnot_qubit_ancilla();

struct DetectorModel {
  double eta0 = 1.0;
  double eta1 = 1.0;
  double dark_rate = 0.0;
  bool blinded = false;
  /// Outcome forced on a blinded detector; sees only the basis Bob set.
  std::function<ClickOutcome(qm::Basis, Rng&)> override_outcome;

  static DetectorModel ideal() { return {}; }
  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
  bool is_ideal() const { return eta0 == 1.0 && eta1 == 1.0 && dark_rate == 0.0 && !blinded; }
};

std::vector<std::string> blinding_override_names();
std::function<ClickOutcome(qm::Basis, Rng&)> blinding_override(std::string_view name);

/// Bob's two-detector readout of the returned qubit in `basis`. The Born
/// outcome fires its detector with that detector's efficiency; each detector
/// then adds a dark click independently with probability dark_rate.
ClickOutcome detector_click(const DetectorModel& model, const LineState& state, qm::Basis basis, Rng& rng);

}  // namespace dqkd::adv
