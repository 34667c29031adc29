#include "dqkd/adversary.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dqkd::adv {

using qm::Basis;
using qm::DensityMatrix;
using qm::Matrix;

std::string_view to_string(ClickOutcome c) {
  switch (c) {
    case ClickOutcome::Bit0: return "bit0";
    case ClickOutcome::Bit1: return "bit1";
    case ClickOutcome::NoClick: return "no_click";
    case ClickOutcome::DoubleClick: return "double_click";
  }
  return "?";
}

std::optional<ClickOutcome> parse_click(std::string_view s) {
  for (ClickOutcome c : kAllClicks)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

LineState LineState::qubit(const qm::PureState& psi) {
  return LineState::qubit(DensityMatrix::from_pure(psi));
}

LineState LineState::qubit(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw std::invalid_argument("LineState::qubit: expected a 2-dimensional state");
  return LineState{rho, 1};
}

DensityMatrix LineState::qubit_marginal() const {
  if (ancilla_dim == 1) return rho;
  const auto d = dims();
  const std::array<std::size_t, 1> keep{0};
  return qm::partial_trace(rho, keep, d);
}

LineState LineState::with_qubit_unitary(const Matrix& op) const {
  const auto d = dims();
  return LineState{qm::apply_unitary(rho, qm::embed(op, d, 0)), ancilla_dim};
}

LineState ForwardAttack::channel(const LineState& in) const {
  const auto parts = branches(in);
  if (parts.empty()) throw std::logic_error("forward attack produced no branches");
  Matrix acc = Matrix::Zero(parts.front().state.rho.matrix().rows(), parts.front().state.rho.matrix().cols());
  for (const auto& b : parts) acc += b.weight * b.state.rho.matrix();
  return LineState{qm::assume_density(std::move(acc)), parts.front().state.ancilla_dim};
}

ClickOutcome sample_click(const ClickDistribution& dist, Rng& rng) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw std::invalid_argument("sample_click: negative probability");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("sample_click: empty distribution");
  // No rescaling for already-normalised input, so a Born distribution draws
  // the same outcome as qm::sample_outcome on the same generator.
  const double u = std::abs(total - 1.0) < 1e-12 ? rng.uniform() : rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last = i;
    acc += dist[i];
    if (u < acc) return kAllClicks[i];
  }
  return kAllClicks[last];
}

namespace {

ClickDistribution born_clicks(const LineState& s, Basis b) {
  const auto d = s.dims();
  const auto p = qm::born_probabilities(s.rho, qm::qubit_basis(b), d, 0);
  return {p[0], p[1], 0.0, 0.0};
}

qm::QubitBasis breidbart_basis() {
  const double c = std::cos(std::numbers::pi / 8.0);
  const double s = std::sin(std::numbers::pi / 8.0);
  qm::Vector v0(2), v1(2);
  v0 << c, s;
  v1 << -s, c;
  return {v0, v1};
}

// Replace factor 0 by |v><v|, keeping the (post-measurement) ancilla.
LineState resend(const DensityMatrix& post, std::size_t ancilla_dim, const qm::Vector& v) {
  const DensityMatrix eigen = DensityMatrix::from_pure(qm::PureState(v));
  if (ancilla_dim == 1) return LineState{eigen, 1};
  const std::array<std::size_t, 2> dims{2, ancilla_dim};
  const std::array<std::size_t, 1> keep{1};
  return LineState{qm::tensor(eigen, qm::partial_trace(post, keep, dims)), ancilla_dim};
}

class IdentityForward final : public ForwardAttack {
 public:
  std::string name() const override { return "none"; }
  LineState apply(LineState in, std::size_t, EveMemory&, Rng&) override { return in; }
  std::vector<ForwardBranch> branches(const LineState& in) const override { return {{1.0, "", in}}; }
};

class IdentityBackward final : public BackwardAttack {
 public:
  std::string name() const override { return "none"; }
  LineState apply(LineState in, std::size_t, EveMemory&, Rng&) override { return in; }
  bool is_identity() const override { return true; }
};

class HonestAnnouncer final : public Announcer {
 public:
  std::string name() const override { return "honest"; }
  ClickOutcome announce(const EveView& view, Rng& rng) const override {
    return sample_click(born_clicks(view.returned, view.basis.basis()), rng);
  }
  std::optional<ClickDistribution> distribution(const EveView& view) const override {
    return born_clicks(view.returned, view.basis.basis());
  }
};

class InterceptResend final : public ForwardAttack {
 public:
  explicit InterceptResend(BasisPolicy policy) : policy_(policy) {}

  std::string name() const override { return "intercept-resend-" + std::string(to_string(policy_)); }

  LineState apply(LineState in, std::size_t round, EveMemory& memory, Rng& rng) override {
    const auto [basis, label] = choose(rng);
    const auto d = in.dims();
    const auto m = qm::measure_projective(in.rho, basis, d, 0, rng);
    memory.intercepts.push_back({round, label, m.outcome});
    return resend(m.post, in.ancilla_dim, m.outcome ? basis.one : basis.zero);
  }

  std::vector<ForwardBranch> branches(const LineState& in) const override {
    struct Choice {
      double weight;
      qm::QubitBasis basis;
      std::string label;
    };
    std::vector<Choice> choices;
    switch (policy_) {
      case BasisPolicy::RandomZX:
        choices = {{0.5, qm::qubit_basis(Basis::Z), "Z"}, {0.5, qm::qubit_basis(Basis::X), "X"}};
        break;
      case BasisPolicy::FixedZ: choices = {{1.0, qm::qubit_basis(Basis::Z), "Z"}}; break;
      case BasisPolicy::FixedX: choices = {{1.0, qm::qubit_basis(Basis::X), "X"}}; break;
      case BasisPolicy::Breidbart: choices = {{1.0, breidbart_basis(), "B"}}; break;
    }
    const auto d = in.dims();
    std::vector<ForwardBranch> out;
    for (const auto& c : choices) {
      const auto probs = qm::born_probabilities(in.rho, c.basis, d, 0);
      for (int b = 0; b < 2; ++b) {
        if (probs[b] <= 0.0) continue;
        const qm::Vector& v = b ? c.basis.one : c.basis.zero;
        const Matrix p = qm::embed(v * v.adjoint(), d, 0);
        const DensityMatrix post = qm::assume_density(p * in.rho.matrix() * p / probs[b]);
        out.push_back({c.weight * probs[b], c.label + ":" + std::to_string(b), resend(post, in.ancilla_dim, v)});
      }
    }
    return out;
  }

 private:
  std::pair<qm::QubitBasis, std::string> choose(Rng& rng) const {
    switch (policy_) {
      case BasisPolicy::RandomZX: {
        const Basis b = rng.bit() ? Basis::X : Basis::Z;
        return {qm::qubit_basis(b), std::string(qm::to_string(b))};
      }
      case BasisPolicy::FixedZ: return {qm::qubit_basis(Basis::Z), "Z"};
      case BasisPolicy::FixedX: return {qm::qubit_basis(Basis::X), "X"};
      case BasisPolicy::Breidbart: return {breidbart_basis(), "B"};
    }
    throw std::logic_error("unreachable basis policy");
  }

  BasisPolicy policy_;
};

class UnitaryAncilla final : public ForwardAttack {
 public:
  UnitaryAncilla(Matrix u, std::size_t ancilla_dim) : u_(std::move(u)), ancilla_dim_(ancilla_dim) {}

  std::string name() const override { return "unitary-ancilla"; }

  LineState apply(LineState in, std::size_t, EveMemory&, Rng&) override { return evolve(in); }

  std::vector<ForwardBranch> branches(const LineState& in) const override { return {{1.0, "", evolve(in)}}; }

 private:
  LineState evolve(const LineState& in) const {
    if (in.ancilla_dim != 1) throw std::logic_error("unitary-ancilla: qubit already carries an ancilla");
    qm::Vector e = qm::Vector::Zero(static_cast<Eigen::Index>(ancilla_dim_));
    e(0) = 1.0;
    const DensityMatrix joint = qm::tensor(in.rho, DensityMatrix::from_pure(qm::PureState(e)));
    return LineState{qm::apply_unitary(joint, u_), ancilla_dim_};
  }

  Matrix u_;
  std::size_t ancilla_dim_;
};

class DistributionAnnouncer final : public Announcer {
 public:
  explicit DistributionAnnouncer(FakedStateStrategy s) : s_(std::move(s)) {}
  std::string name() const override { return s_.name; }
  ClickOutcome announce(const EveView& view, Rng& rng) const override {
    return sample_click(s_.distribution(view), rng);
  }
  std::optional<ClickDistribution> distribution(const EveView& view) const override {
    return s_.distribution(view);
  }

 private:
  FakedStateStrategy s_;
};

class SamplerAnnouncer final : public Announcer {
 public:
  SamplerAnnouncer(std::string name, std::function<ClickOutcome(const EveView&, Rng&)> f)
      : name_(std::move(name)), f_(std::move(f)) {}
  std::string name() const override { return name_; }
  ClickOutcome announce(const EveView& view, Rng& rng) const override { return f_(view, rng); }
  std::optional<ClickDistribution> distribution(const EveView&) const override { return std::nullopt; }

 private:
  std::string name_;
  std::function<ClickOutcome(const EveView&, Rng&)> f_;
};

std::string join(const std::vector<std::string>& names) {
  std::ostringstream os;
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? ", " : "") << names[i];
  return os.str();
}

}  // namespace

AttackStrategy::AttackStrategy(std::string name, std::unique_ptr<ForwardAttack> forward,
                               std::unique_ptr<BackwardAttack> backward,
                               std::unique_ptr<Announcer> announcer, bool requires_eve_measures)
    : name_(std::move(name)),
      forward_(forward ? std::move(forward) : std::make_unique<IdentityForward>()),
      backward_(backward ? std::move(backward) : std::make_unique<IdentityBackward>()),
      announcer_(announcer ? std::move(announcer) : std::make_unique<HonestAnnouncer>()),
      requires_eve_measures_(requires_eve_measures) {}

LineState AttackStrategy::on_forward(LineState in, std::size_t round, Rng& rng) {
  return forward_->apply(std::move(in), round, memory_, rng);
}

LineState AttackStrategy::on_backward(LineState in, std::size_t round, Rng& rng) {
  return backward_->apply(std::move(in), round, memory_, rng);
}

ClickOutcome AttackStrategy::announce(const LineState& returned, ReleasedBasis basis, std::size_t round,
                                      Rng& rng) {
  const EveView view{returned, basis, round, memory_};
  return announcer_->announce(view, rng);
}

AttackStrategy combine(AttackStrategy lines, AttackStrategy announcing) {
  std::string name = lines.name_ + "+" + announcing.announcer_->name();
  AttackStrategy out(std::move(name), std::move(lines.forward_),
                     std::move(lines.backward_), std::move(announcing.announcer_),
                     announcing.requires_eve_measures_);
  return out;
}

std::string_view to_string(BasisPolicy p) {
  switch (p) {
    case BasisPolicy::RandomZX: return "random";
    case BasisPolicy::FixedZ: return "z";
    case BasisPolicy::FixedX: return "x";
    case BasisPolicy::Breidbart: return "breidbart";
  }
  return "?";
}

std::optional<BasisPolicy> parse_basis_policy(std::string_view s) {
  for (BasisPolicy p : {BasisPolicy::RandomZX, BasisPolicy::FixedZ, BasisPolicy::FixedX, BasisPolicy::Breidbart})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

AttackStrategy attack_none() { return AttackStrategy("none", nullptr, nullptr, nullptr, false); }

AttackStrategy attack_intercept_resend(BasisPolicy policy) {
  auto fwd = std::make_unique<InterceptResend>(policy);
  std::string name = fwd->name();
  return AttackStrategy(std::move(name), std::move(fwd), nullptr, nullptr, false);
}

AttackStrategy attack_unitary_ancilla(const Matrix& u_be, std::size_t ancilla_dim) {
  if (ancilla_dim == 0 || u_be.rows() != u_be.cols() ||
      static_cast<std::size_t>(u_be.rows()) != 2 * ancilla_dim)
    throw std::invalid_argument("attack_unitary_ancilla: U_BE must be (2*ancilla_dim) square");
  if (!std::has_single_bit(ancilla_dim))
    throw std::invalid_argument("attack_unitary_ancilla: ancilla_dim must be a power of two");
  if (!qm::is_unitary(u_be)) throw std::invalid_argument("attack_unitary_ancilla: U_BE is not unitary");
  return AttackStrategy("unitary-ancilla", std::make_unique<UnitaryAncilla>(u_be, ancilla_dim), nullptr,
                        nullptr, false);
}

AttackStrategy eve_measure_in_bob_basis() {
  return AttackStrategy("eve-measures", nullptr, nullptr, std::make_unique<HonestAnnouncer>(), true);
}

AttackStrategy eve_faked_states(FakedStateStrategy strategy) {
  std::string name = "faked-" + strategy.name;
  return AttackStrategy(std::move(name), nullptr, nullptr,
                        std::make_unique<DistributionAnnouncer>(std::move(strategy)), true);
}

AttackStrategy eve_faked_states(std::string name, std::function<ClickOutcome(const EveView&, Rng&)> sampler) {
  std::string label = "faked-" + name;
  return AttackStrategy(std::move(label), nullptr, nullptr,
                        std::make_unique<SamplerAnnouncer>(std::move(name), std::move(sampler)), true);
}

std::vector<std::string> faked_state_names() {
  return {"always-bit0", "always-bit1", "measure-announced-basis", "measure-wrong-basis", "measure-z",
          "random-bit"};
}

FakedStateStrategy faked_state_strategy(std::string_view name) {
  const std::string n(name);
  if (n == "always-bit0") return {n, [](const EveView&) { return ClickDistribution{1, 0, 0, 0}; }};
  if (n == "always-bit1") return {n, [](const EveView&) { return ClickDistribution{0, 1, 0, 0}; }};
  if (n == "measure-announced-basis")
    return {n, [](const EveView& v) { return born_clicks(v.returned, v.basis.basis()); }};
  if (n == "measure-wrong-basis")
    return {n, [](const EveView& v) { return born_clicks(v.returned, qm::other(v.basis.basis())); }};
  if (n == "measure-z") return {n, [](const EveView& v) { return born_clicks(v.returned, Basis::Z); }};
  if (n == "random-bit") return {n, [](const EveView&) { return ClickDistribution{0.5, 0.5, 0, 0}; }};
  throw std::invalid_argument("unknown faked-state strategy '" + n + "'; known: " + join(faked_state_names()));
}

std::vector<std::string> forward_attack_names() {
  return {"none", "intercept-resend-random", "intercept-resend-z", "intercept-resend-x",
          "intercept-resend-breidbart", "unitary-cnot"};
}

Matrix cnot_qubit_ancilla() {
  Matrix u = Matrix::Zero(4, 4);
  u(0, 0) = 1;
  u(1, 1) = 1;
  u(2, 3) = 1;
  u(3, 2) = 1;
  return u;
}

AttackStrategy forward_attack(std::string_view name) {
  if (name == "none") return attack_none();
  if (name == "unitary-cnot") return attack_unitary_ancilla(cnot_qubit_ancilla(), 2);
  constexpr std::string_view prefix = "intercept-resend-";
  if (name.substr(0, prefix.size()) == prefix)
    if (auto p = parse_basis_policy(name.substr(prefix.size()))) return attack_intercept_resend(*p);
  throw std::invalid_argument("unknown forward attack '" + std::string(name) +
                              "'; known: " + join(forward_attack_names()));
}

void DetectorModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(eta0) || !prob(eta1)) throw std::invalid_argument("detector efficiencies must lie in [0, 1]");
  if (!(dark_rate >= 0.0 && dark_rate < 1.0)) throw std::invalid_argument("dark_rate must lie in [0, 1)");
  if (blinded && !override_outcome) throw std::invalid_argument("blinded detector needs an override");
}

std::vector<std::string> blinding_override_names() { return {"force-bit0", "force-bit1", "random-bit"}; }

std::function<ClickOutcome(Basis, Rng&)> blinding_override(std::string_view name) {
  if (name == "force-bit0") return [](Basis, Rng&) { return ClickOutcome::Bit0; };
  if (name == "force-bit1") return [](Basis, Rng&) { return ClickOutcome::Bit1; };
  if (name == "random-bit") return [](Basis, Rng& rng) { return click_from_bit(rng.bit()); };
  throw std::invalid_argument("unknown blinding override '" + std::string(name) +
                              "'; known: " + join(blinding_override_names()));
}

ClickOutcome detector_click(const DetectorModel& model, const LineState& state, Basis basis, Rng& rng) {
  model.validate();
  if (model.blinded) return model.override_outcome(basis, rng);
  const auto d = state.dims();
  const int b = qm::sample_outcome(qm::born_probabilities(state.rho, qm::qubit_basis(basis), d, 0), rng);
  std::array<bool, 2> click{false, false};
  click[b] = rng.uniform() < (b ? model.eta1 : model.eta0);
  if (model.dark_rate > 0.0)
    for (auto& c : click) c = (rng.uniform() < model.dark_rate) || c;
  if (click[0] && click[1]) return ClickOutcome::DoubleClick;
  if (click[0]) return ClickOutcome::Bit0;
  if (click[1]) return ClickOutcome::Bit1;
  return ClickOutcome::NoClick;
}

}  // namespace dqkd::adv
