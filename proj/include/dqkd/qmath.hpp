#pragma once

// Small-dimension complex linear algebra for qubit protocols: states, the
// Pauli encodings, projective measurement, tensor products, partial traces
// and entropies. Dimensions are tiny (at most a few qubits plus an ancilla),
// so everything is dense and eager.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dqkd/rng.hpp"

namespace dqkd::qm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kNormTol = 1e-12;
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kUnitaryTol = 1e-10;

enum class Basis : std::uint8_t { Z, X };

enum class Bb84State : std::uint8_t { ZeroZ, OneZ, PlusX, MinusX };

enum class PauliOp : std::uint8_t { I, X, Y, Z };

inline constexpr std::array<Bb84State, 4> kAllStates = {Bb84State::ZeroZ, Bb84State::OneZ,
                                                        Bb84State::PlusX, Bb84State::MinusX};
inline constexpr std::array<PauliOp, 4> kAllOps = {PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z};
inline constexpr std::array<Basis, 2> kBothBases = {Basis::Z, Basis::X};

constexpr Basis basis(Bb84State s) {
  return (s == Bb84State::ZeroZ || s == Bb84State::OneZ) ? Basis::Z : Basis::X;
}

constexpr int bit(Bb84State s) { return (s == Bb84State::OneZ || s == Bb84State::MinusX) ? 1 : 0; }

constexpr Bb84State make_state(Basis b, int value) {
  if (b == Basis::Z) return value ? Bb84State::OneZ : Bb84State::ZeroZ;
  return value ? Bb84State::MinusX : Bb84State::PlusX;
}

constexpr Basis other(Basis b) { return b == Basis::Z ? Basis::X : Basis::Z; }

std::string_view to_string(Basis b);
std::string_view to_string(Bb84State s);
std::string_view to_string(PauliOp op);
std::optional<Basis> parse_basis(std::string_view s);
std::optional<PauliOp> parse_pauli(std::string_view s);

/// Unit-norm state vector on a 2^k-dimensional space. Keeps global phase.
class PureState {
 public:
  /// Throws std::invalid_argument unless the length is a power of two and the
  /// squared norm is 1 within kNormTol.
  explicit PureState(Vector amplitudes);

  const Vector& amplitudes() const { return amp_; }
  std::size_t dim() const { return static_cast<std::size_t>(amp_.size()); }
  Complex operator[](std::size_t i) const { return amp_(static_cast<Eigen::Index>(i)); }

 private:
  Vector amp_;
};

/// Hermitian, unit-trace, positive semidefinite operator.
///
/// from_matrix() validates all three invariants. Operations in this module
/// that provably preserve them (unitary conjugation, tensor, partial trace,
/// projective update) construct results without re-running the eigen check.
class DensityMatrix {
 public:
  static DensityMatrix from_matrix(Matrix m);
  static DensityMatrix from_pure(const PureState& psi);
  static DensityMatrix maximally_mixed(std::size_t dim);

  const Matrix& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  Complex operator()(std::size_t r, std::size_t c) const {
    return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

 private:
  explicit DensityMatrix(Matrix m) : m_(std::move(m)) {}
  friend DensityMatrix assume_density(Matrix m);

  Matrix m_;
};

/// Builds a DensityMatrix from a matrix the caller guarantees is valid, only
/// symmetrising away rounding noise. For use inside operations whose algebra
/// preserves the invariants.
DensityMatrix assume_density(Matrix m);

/// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> density_violation(const Matrix& m);

Matrix identity(std::size_t dim);

/// Matrix form of an encoding operation. Y is the real antisymmetric
/// |0><1| - |1><0|, i.e. i times the textbook Pauli-Y.
Matrix pauli_matrix(PauliOp op);

/// Basis eigenvector for (basis, bit); |+-> = (|0> +- |1>)/sqrt(2).
Vector basis_ket(Basis b, int value);
PureState bb84_ket(Bb84State s);

double unitarity_residual(const Matrix& u);
bool is_unitary(const Matrix& u, double tol = kUnitaryTol);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// U rho U^dagger. Throws std::invalid_argument on dimension mismatch or if U
/// is not unitary within kUnitaryTol.
DensityMatrix apply_unitary(const DensityMatrix& rho, const Matrix& u);
PureState apply_unitary(const PureState& psi, const Matrix& u);

Matrix kron(const Matrix& a, const Matrix& b);
DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);
PureState tensor(const PureState& a, const PureState& b);

/// `op` acting on factor `subsystem` of a product space with the given
/// factor dimensions, identity elsewhere. Factor 0 is the most significant.
Matrix embed(const Matrix& op, std::span<const std::size_t> dims, std::size_t subsystem);

/// Reduced state on the factors listed in `keep` (any order; result keeps
/// them in ascending factor order).
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::size_t> keep,
                            std::span<const std::size_t> dims);

/// Orthonormal measurement basis for one qubit.
struct QubitBasis {
  Vector zero;
  Vector one;
};

QubitBasis qubit_basis(Basis b);

/// Born probabilities of outcomes 0 and 1 when measuring qubit `subsystem`.
std::array<double, 2> born_probabilities(const DensityMatrix& rho, const QubitBasis& basis,
                                         std::span<const std::size_t> dims, std::size_t subsystem);
std::array<double, 2> born_probabilities(const DensityMatrix& rho, Basis b);

/// Draws an outcome from Born probabilities. Outcome 0 iff u < p0 for one
/// uniform draw, so identical generators give identical outcomes across
/// every measurement path.
int sample_outcome(const std::array<double, 2>& probs, Rng& rng);

struct PureMeasurement {
  int outcome;
  PureState post;
};

struct MixedMeasurement {
  int outcome;
  DensityMatrix post;
};

PureMeasurement measure_projective(const PureState& psi, Basis b, Rng& rng);
MixedMeasurement measure_projective(const DensityMatrix& rho, Basis b, Rng& rng);
MixedMeasurement measure_projective(const DensityMatrix& rho, const QubitBasis& basis,
                                    std::span<const std::size_t> dims, std::size_t subsystem,
                                    Rng& rng);

/// Base-2 von Neumann entropy. Eigenvalues in [-kPsdTol, 0) are clamped to 0;
/// anything more negative throws std::domain_error.
double von_neumann_entropy(const DensityMatrix& rho);

/// h(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0. Throws
/// std::domain_error outside [0, 1].
double binary_entropy(double x);

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of R's diagonal folded back into Q.
Matrix random_unitary(std::size_t dim, Rng& rng);

}  // namespace dqkd::qm
