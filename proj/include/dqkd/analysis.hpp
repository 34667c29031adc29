#pragma once

// Transcript statistics, the asymptotic key rate, and exact (enumerated or
// density-matrix) checks of the security quantities.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "dqkd/adversary.hpp"
#include "dqkd/protocol.hpp"
#include "dqkd/qmath.hpp"

namespace dqkd::analysis {

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotEnumerable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Channel estimates. Fidelities are indexed like qm::kAllStates
/// (|0>, |1>, |+>, |->).
struct ChannelStats {
  double f0 = 0, f1 = 0, fplus = 0, fminus = 0;
  std::array<std::size_t, 4> n_check_used{};
  std::array<std::size_t, 4> n_check_matches{};
  double xi = 0;
  double e = 0;
  std::size_t n_disclosed = 0;
  std::size_t n_disclosed_errors = 0;

  std::array<double, 4> fidelities() const { return {f0, f1, fplus, fminus}; }
  /// Binomial standard errors of xi and e.
  double xi_sigma() const;
  double e_sigma() const;
};

constexpr double xi_from_fidelities(const std::array<double, 4>& f) {
  return (f[0] + f[1] + f[2] + f[3]) / 2.0 - 1.0;
}

/// Fidelities from consistent-basis check rounds, e from disclosed conclusive
/// encode rounds. Throws InsufficientData naming what is missing.
ChannelStats estimate_stats(const proto::Transcript& t);

struct KeyRateReport {
  double xi = 0;
  double e = 0;
  double r = 0;
  std::optional<double> r_pa;
  bool abort = false;
  std::string reason;
  /// True if xi had to be clamped into [0, 1].
  bool xi_clamped = false;
};

inline constexpr double kXiThreshold = 0.5;

/// r = 1 - h(xi) - h(e). Aborts when xi < 1/2 or r <= 0 (both reasons are
/// reported). Throws std::domain_error for e outside [0, 1] or non-finite xi.
KeyRateReport key_rate(double xi, double e);

/// Forward fidelities of the four states through the attack's averaged
/// channel.
std::array<double, 4> exact_fidelities(const adv::ForwardAttack& forward);

/// Factor dimensions of rho^ABE: Alice's key register, Bob's qubit, Eve.
inline std::array<std::size_t, 3> abe_dims(std::size_t ancilla_dim) { return {2, 2, ancilla_dim}; }

/// rho^ABE = 1/2 |0><0| (x) rho_BE + 1/2 |1><1| (x) Y_B rho_BE Y_B^dagger, where
/// rho_BE = U (rho_B (x) |E><E|) U^dagger and |E> is the first ancilla basis
/// vector. The one-argument form uses rho_B = I/2. Throws
/// std::invalid_argument on dimension mismatch or a non-unitary U.
qm::DensityMatrix build_rho_abe(const qm::Matrix& u_be, std::size_t ancilla_dim);
qm::DensityMatrix build_rho_abe(const qm::DensityMatrix& rho_b, const qm::Matrix& u_be, std::size_t ancilla_dim);

/// S(rho^ABE) - S(rho^BE), rho^BE = tr_A rho^ABE.
double pa_rate(const qm::DensityMatrix& rho_abe, std::size_t ancilla_dim);

/// Bob's per-basis ensembles fed into the evolution.
struct BasisEnsembles {
  qm::DensityMatrix given_z;
  qm::DensityMatrix given_x;

  /// 1/2|0><0| + 1/2|1><1| and 1/2|+><+| + 1/2|-><-|, built from the kets.
  static BasisEnsembles standard();
  /// Negative control: 3/4|0><0| + 1/4|1><1| against the standard X ensemble.
  static BasisEnsembles basis_dependent();
};

struct BasisIndependenceReport {
  double max_deviation = 0;
  double tol = 0;
  bool pass = false;
};

/// Evolves both basis ensembles through the same U_BE and encoding and
/// compares rho^{ABE|z} with rho^{ABE|x} entrywise.
BasisIndependenceReport verify_basis_independence(const qm::Matrix& u_be, std::size_t ancilla_dim, double tol,
                                                  const BasisEnsembles& ensembles = BasisEnsembles::standard());

struct EnumerationOptions {
  /// Counterfactually hand Bob's prepared bit to Eve (negative control).
  bool leak_bob_bit = false;
};

/// Exact I(Alice's key bit ; Eve's view) in bits for a two-way variant. Eve's
/// view is the released basis, her record from the forward line, and the
/// click she announces. Throws NotEnumerable if the announcer has no exact
/// distribution or the backward attack is not the identity, and
/// std::invalid_argument for Bb84Otp.
double eve_information(const adv::AttackStrategy& strategy, proto::ProtocolVariant variant,
                       EnumerationOptions options = {});

/// Joint distribution over (Bob's state, Alice's key bit, public backward
/// bit, Bob's decoded bit), flattened in that order (4 x 2 x 2 x 2).
using JointDistribution = std::array<double, 32>;

constexpr std::size_t joint_index(std::size_t state, int key, int pub, int decoded) {
  return ((state * 2 + static_cast<std::size_t>(key)) * 2 + static_cast<std::size_t>(pub)) * 2 +
         static_cast<std::size_t>(decoded);
}

/// P(public backward bit = 1).
double public_bit_one(const JointDistribution& d);
/// max over key values a of |P(pub = 1 | a) - P(pub = 1)|.
double public_bit_key_dependence(const JointDistribution& d);

struct ProtocolComparison {
  JointDistribution four_op{};
  JointDistribution bb84_otp{};
  double max_deviation = 0;
  double tol = 0;
  bool pass = false;
};

/// Four-op protocol with Eve honestly measuring in Bob's basis against
/// BB84 + classical one-time pad, both under the same forward attack,
/// enumerated exactly.
ProtocolComparison compare_protocols_bc(const adv::ForwardAttack& forward, double tol = 1e-12);

/// Exact click distribution of `announcer` for a returned system and basis,
/// evaluated offline. Throws NotEnumerable if the announcer only samples.
adv::ClickDistribution announcement_distribution(const adv::Announcer& announcer, const adv::LineState& returned,
                                                 qm::Basis basis, const adv::EveMemory& memory = {});

/// Mutual information (bits) between the key bit and the view, from rows
/// {P(key=0, view), P(key=1, view)}.
double mutual_information(const std::vector<std::array<double, 2>>& joint);

}  // namespace dqkd::analysis
