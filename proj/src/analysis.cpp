#include "dqkd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dqkd::analysis {

using proto::Mode;
using proto::ProtocolVariant;
using qm::Basis;
using qm::DensityMatrix;
using qm::Matrix;

double ChannelStats::xi_sigma() const {
  double var = 0.0;
  const auto f = fidelities();
  for (std::size_t s = 0; s < 4; ++s)
    if (n_check_used[s] > 0) var += f[s] * (1.0 - f[s]) / static_cast<double>(n_check_used[s]);
  return 0.5 * std::sqrt(var);
}

double ChannelStats::e_sigma() const {
  if (n_disclosed == 0) return 0.0;
  return std::sqrt(e * (1.0 - e) / static_cast<double>(n_disclosed));
}

ChannelStats estimate_stats(const proto::Transcript& t) {
  ChannelStats st;
  for (const auto& r : t.rounds) {
    if (r.mode == Mode::Check) {
      if (!r.alice_check_basis || !r.alice_check_outcome) continue;
      // Rounds where Alice picked the other basis carry no fidelity information.
      if (*r.alice_check_basis != r.bob_basis) continue;
      const auto s = static_cast<std::size_t>(r.bob_state());
      ++st.n_check_used[s];
      if (*r.alice_check_outcome == r.bob_bit) ++st.n_check_matches[s];
    } else if (r.disclosed && r.alice_key_bit && r.bob_decoded_bit) {
      ++st.n_disclosed;
      if (*r.alice_key_bit != *r.bob_decoded_bit) ++st.n_disclosed_errors;
    }
  }
  std::array<double, 4> f{};
  for (std::size_t s = 0; s < 4; ++s) {
    if (st.n_check_used[s] == 0)
      throw InsufficientData("no consistent-basis check rounds for state |" +
                             std::string(qm::to_string(qm::kAllStates[s])) + ">");
    f[s] = static_cast<double>(st.n_check_matches[s]) / static_cast<double>(st.n_check_used[s]);
  }
  if (st.n_disclosed == 0) throw InsufficientData("no disclosed conclusive encode rounds");
  st.f0 = f[0];
  st.f1 = f[1];
  st.fplus = f[2];
  st.fminus = f[3];
  st.xi = xi_from_fidelities(f);
  st.e = static_cast<double>(st.n_disclosed_errors) / static_cast<double>(st.n_disclosed);
  return st;
}

KeyRateReport key_rate(double xi, double e) {
  if (!std::isfinite(xi)) throw std::domain_error("key_rate: xi is not finite");
  if (!(e >= 0.0 && e <= 1.0)) throw std::domain_error("key_rate: e outside [0, 1]");
  KeyRateReport rep;
  rep.xi = std::clamp(xi, 0.0, 1.0);
  rep.xi_clamped = rep.xi != xi;
  rep.e = e;
  rep.r = 1.0 - qm::binary_entropy(rep.xi) - qm::binary_entropy(e);
  std::string reason;
  if (rep.xi < kXiThreshold) reason = "xi below 1/2";
  if (rep.r <= 0.0) reason += std::string(reason.empty() ? "" : "; ") + "non-positive key rate";
  rep.abort = !reason.empty();
  rep.reason = reason;
  return rep;
}

std::array<double, 4> exact_fidelities(const adv::ForwardAttack& forward) {
  std::array<double, 4> f{};
  for (std::size_t s = 0; s < 4; ++s) {
    const auto state = qm::kAllStates[s];
    const adv::LineState out = forward.channel(adv::LineState::qubit(qm::bb84_ket(state)));
    const auto d = out.dims();
    f[s] = qm::born_probabilities(out.rho, qm::qubit_basis(qm::basis(state)), d, 0)[qm::bit(state)];
  }
  return f;
}

DensityMatrix build_rho_abe(const Matrix& u_be, std::size_t ancilla_dim) {
  return build_rho_abe(DensityMatrix::maximally_mixed(2), u_be, ancilla_dim);
}

DensityMatrix build_rho_abe(const DensityMatrix& rho_b, const Matrix& u_be, std::size_t ancilla_dim) {
  if (rho_b.dim() != 2) throw std::invalid_argument("build_rho_abe: rho_B must be a qubit state");
  if (ancilla_dim == 0 || static_cast<std::size_t>(u_be.rows()) != 2 * ancilla_dim)
    throw std::invalid_argument("build_rho_abe: U_BE must have dimension 2 * ancilla_dim");
  qm::Vector e = qm::Vector::Zero(static_cast<Eigen::Index>(ancilla_dim));
  e(0) = 1.0;
  const DensityMatrix forward =
      qm::apply_unitary(qm::tensor(rho_b, DensityMatrix::from_pure(qm::PureState(e))), u_be);
  const std::array<std::size_t, 2> be_dims{2, ancilla_dim};
  const DensityMatrix flipped = qm::apply_unitary(forward, qm::embed(qm::pauli_matrix(qm::PauliOp::Y), be_dims, 0));

  Matrix a0 = Matrix::Zero(2, 2), a1 = Matrix::Zero(2, 2);
  a0(0, 0) = 0.5;
  a1(1, 1) = 0.5;
  return qm::assume_density(qm::kron(a0, forward.matrix()) + qm::kron(a1, flipped.matrix()));
}

double pa_rate(const DensityMatrix& rho_abe, std::size_t ancilla_dim) {
  const auto dims = abe_dims(ancilla_dim);
  const std::array<std::size_t, 2> keep{1, 2};
  return qm::von_neumann_entropy(rho_abe) - qm::von_neumann_entropy(qm::partial_trace(rho_abe, keep, dims));
}

namespace {

DensityMatrix even_mixture(const qm::Vector& a, const qm::Vector& b) {
  return DensityMatrix::from_matrix(0.5 * (a * a.adjoint()) + 0.5 * (b * b.adjoint()));
}

}  // namespace

BasisEnsembles BasisEnsembles::standard() {
  return {even_mixture(qm::basis_ket(Basis::Z, 0), qm::basis_ket(Basis::Z, 1)),
          even_mixture(qm::basis_ket(Basis::X, 0), qm::basis_ket(Basis::X, 1))};
}

BasisEnsembles BasisEnsembles::basis_dependent() {
  const qm::Vector k0 = qm::basis_ket(Basis::Z, 0), k1 = qm::basis_ket(Basis::Z, 1);
  return {DensityMatrix::from_matrix(0.75 * (k0 * k0.adjoint()) + 0.25 * (k1 * k1.adjoint())),
          even_mixture(qm::basis_ket(Basis::X, 0), qm::basis_ket(Basis::X, 1))};
}

BasisIndependenceReport verify_basis_independence(const Matrix& u_be, std::size_t ancilla_dim, double tol,
                                                  const BasisEnsembles& ensembles) {
  const DensityMatrix given_z = build_rho_abe(ensembles.given_z, u_be, ancilla_dim);
  const DensityMatrix given_x = build_rho_abe(ensembles.given_x, u_be, ancilla_dim);
  BasisIndependenceReport rep;
  rep.max_deviation = qm::max_abs_diff(given_z.matrix(), given_x.matrix());
  rep.tol = tol;
  rep.pass = rep.max_deviation <= tol;
  return rep;
}

/// Offline counterpart of the session driver: it may release Bob's basis to
/// an announcer because nothing here is a live round.
class AnnouncementEnumerator {
 public:
  static adv::ClickDistribution distribution(const adv::Announcer& announcer, const adv::LineState& returned,
                                             Basis basis, const adv::EveMemory& memory) {
    const adv::EveView view{returned, adv::ReleasedBasis(basis), 0, memory};
    auto d = announcer.distribution(view);
    if (!d) throw NotEnumerable("announcer '" + announcer.name() + "' has no exact distribution");
    return *d;
  }
};

adv::ClickDistribution announcement_distribution(const adv::Announcer& announcer, const adv::LineState& returned,
                                                 Basis basis, const adv::EveMemory& memory) {
  return AnnouncementEnumerator::distribution(announcer, returned, basis, memory);
}

double mutual_information(const std::vector<std::array<double, 2>>& joint) {
  double pa[2] = {0.0, 0.0};
  for (const auto& row : joint) {
    pa[0] += row[0];
    pa[1] += row[1];
  }
  double mi = 0.0;
  for (const auto& row : joint) {
    const double pv = row[0] + row[1];
    for (int a = 0; a < 2; ++a)
      if (row[a] > 0.0) mi += row[a] * std::log2(row[a] / (pa[a] * pv));
  }
  return std::max(mi, 0.0);
}

double eve_information(const adv::AttackStrategy& strategy, ProtocolVariant variant, EnumerationOptions options) {
  if (variant == ProtocolVariant::Bb84Otp)
    throw std::invalid_argument("eve_information: bb84_otp has no announcement channel");
  if (!strategy.backward().is_identity())
    throw NotEnumerable("eve_information: backward attack '" + strategy.backward().name() + "' is not enumerable");

  const std::vector<qm::PauliOp> ops = variant == ProtocolVariant::TwoOp
                                           ? std::vector<qm::PauliOp>{qm::PauliOp::I, qm::PauliOp::Y}
                                           : std::vector<qm::PauliOp>(qm::kAllOps.begin(), qm::kAllOps.end());
  const double p_op = 1.0 / static_cast<double>(ops.size());

  // View key: basis | forward record | announced click | leaked bit.
  std::map<std::string, std::array<double, 2>> joint;
  for (auto state : qm::kAllStates) {
    const Basis basis = qm::basis(state);
    for (const auto& branch : strategy.forward().branches(adv::LineState::qubit(qm::bb84_ket(state)))) {
      adv::EveMemory memory;
      if (!branch.record.empty()) memory.intercepts.push_back({0, branch.record, -1});
      for (auto op : ops) {
        const int key = proto::key_bit(variant, basis, op);
        const adv::LineState returned = branch.state.with_qubit_unitary(qm::pauli_matrix(op));
        const auto clicks = AnnouncementEnumerator::distribution(strategy.announcer(), returned, basis, memory);
        for (std::size_t c = 0; c < clicks.size(); ++c) {
          const double p = 0.25 * branch.weight * p_op * clicks[c];
          if (p == 0.0) continue;
          std::string view = std::string(qm::to_string(basis)) + "|" + branch.record + "|" +
                             std::string(adv::to_string(adv::kAllClicks[c]));
          if (options.leak_bob_bit) view += "|" + std::to_string(qm::bit(state));
          joint[view][static_cast<std::size_t>(key)] += p;
        }
      }
    }
  }
  std::vector<std::array<double, 2>> table;
  table.reserve(joint.size());
  for (const auto& [view, row] : joint) table.push_back(row);
  return mutual_information(table);
}

double public_bit_one(const JointDistribution& d) {
  double p = 0.0;
  for (std::size_t s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a)
      for (int dec = 0; dec < 2; ++dec) p += d[joint_index(s, a, 1, dec)];
  return p;
}

double public_bit_key_dependence(const JointDistribution& d) {
  const double p1 = public_bit_one(d);
  double worst = 0.0;
  for (int a = 0; a < 2; ++a) {
    double pa = 0.0, pa1 = 0.0;
    for (std::size_t s = 0; s < 4; ++s)
      for (int pub = 0; pub < 2; ++pub)
        for (int dec = 0; dec < 2; ++dec) {
          pa += d[joint_index(s, a, pub, dec)];
          if (pub == 1) pa1 += d[joint_index(s, a, pub, dec)];
        }
    if (pa > 0.0) worst = std::max(worst, std::abs(pa1 / pa - p1));
  }
  return worst;
}

ProtocolComparison compare_protocols_bc(const adv::ForwardAttack& forward, double tol) {
  ProtocolComparison cmp;
  cmp.tol = tol;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto state = qm::kAllStates[s];
    const Basis basis = qm::basis(state);
    const int b = qm::bit(state);
    const adv::LineState sent = forward.channel(adv::LineState::qubit(qm::bb84_ket(state)));
    const auto d = sent.dims();

    // Four-op: Alice applies a uniformly random Pauli; Eve measures the
    // returned qubit in Bob's basis and announces honestly.
    for (auto op : qm::kAllOps) {
      const int key = proto::key_bit_from_table(basis, op);
      const adv::LineState returned = sent.with_qubit_unitary(qm::pauli_matrix(op));
      const auto probs = qm::born_probabilities(returned.rho, qm::qubit_basis(basis), d, 0);
      for (int c = 0; c < 2; ++c)
        cmp.four_op[joint_index(s, key, c, proto::bob_decode(b, c))] += 0.25 * 0.25 * probs[c];
    }

    // BB84 + OTP: Alice measures in Bob's basis, announces key XOR result.
    const auto probs = qm::born_probabilities(sent.rho, qm::qubit_basis(basis), d, 0);
    for (int key = 0; key < 2; ++key)
      for (int m = 0; m < 2; ++m) {
        const int pub = key ^ m;
        cmp.bb84_otp[joint_index(s, key, pub, proto::bob_decode(b, pub))] += 0.25 * 0.5 * probs[m];
      }
  }
  for (std::size_t i = 0; i < cmp.four_op.size(); ++i)
    cmp.max_deviation = std::max(cmp.max_deviation, std::abs(cmp.four_op[i] - cmp.bb84_otp[i]));
  cmp.pass = cmp.max_deviation <= tol;
  return cmp;
}

}  // namespace dqkd::analysis
