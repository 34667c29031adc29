#include "dqkd/qmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dqkd::qm {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string_view to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

std::string_view to_string(Bb84State s) {
  switch (s) {
    case Bb84State::ZeroZ: return "0";
    case Bb84State::OneZ: return "1";
    case Bb84State::PlusX: return "+";
    case Bb84State::MinusX: return "-";
  }
  return "?";
}

std::string_view to_string(PauliOp op) {
  switch (op) {
    case PauliOp::I: return "I";
    case PauliOp::X: return "X";
    case PauliOp::Y: return "Y";
    case PauliOp::Z: return "Z";
  }
  return "?";
}

std::optional<Basis> parse_basis(std::string_view s) {
  if (s == "Z") return Basis::Z;
  if (s == "X") return Basis::X;
  return std::nullopt;
}

std::optional<PauliOp> parse_pauli(std::string_view s) {
  for (PauliOp op : kAllOps)
    if (to_string(op) == s) return op;
  return std::nullopt;
}

PureState::PureState(Vector amplitudes) : amp_(std::move(amplitudes)) {
  if (!is_power_of_two(static_cast<std::size_t>(amp_.size())))
    throw std::invalid_argument("PureState: length must be a power of two");
  if (std::abs(amp_.squaredNorm() - 1.0) > kNormTol)
    throw std::invalid_argument("PureState: squared norm differs from 1");
}

std::optional<std::string> density_violation(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return "not a non-empty square matrix";
  if (max_abs_diff(m, m.adjoint()) > kHermitianTol) return "not Hermitian";
  if (std::abs(m.trace() - Complex(1.0, 0.0)) > kTraceTol) return "trace differs from 1";
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kPsdTol) return "not positive semidefinite";
  return std::nullopt;
}

DensityMatrix DensityMatrix::from_matrix(Matrix m) {
  if (auto why = density_violation(m)) throw std::invalid_argument("DensityMatrix: " + *why);
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("maximally_mixed: dim must be positive");
  return DensityMatrix(identity(dim) / static_cast<double>(dim));
}

DensityMatrix assume_density(Matrix m) {
  Matrix h = (m + m.adjoint()) * 0.5;
  return DensityMatrix(std::move(h));
}

Matrix identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return Matrix::Identity(n, n);
}

Matrix pauli_matrix(PauliOp op) {
  Matrix m(2, 2);
  switch (op) {
    case PauliOp::I: m << 1, 0, 0, 1; break;
    case PauliOp::X: m << 0, 1, 1, 0; break;
    case PauliOp::Y: m << 0, 1, -1, 0; break;
    case PauliOp::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

Vector basis_ket(Basis b, int value) {
  Vector v(2);
  if (b == Basis::Z) {
    v << (value ? 0.0 : 1.0), (value ? 1.0 : 0.0);
  } else {
    const double s = 1.0 / std::sqrt(2.0);
    v << s, (value ? -s : s);
  }
  return v;
}

PureState bb84_ket(Bb84State s) { return PureState(basis_ket(basis(s), bit(s))); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  return (a - b).cwiseAbs().maxCoeff();
}

double unitarity_residual(const Matrix& u) {
  if (u.rows() != u.cols()) return INFINITY;
  return max_abs_diff(u * u.adjoint(), identity(static_cast<std::size_t>(u.rows())));
}

bool is_unitary(const Matrix& u, double tol) { return unitarity_residual(u) <= tol; }

DensityMatrix apply_unitary(const DensityMatrix& rho, const Matrix& u) {
  if (u.rows() != u.cols() || static_cast<std::size_t>(u.rows()) != rho.dim())
    throw std::invalid_argument("apply_unitary: dimension mismatch");
  if (!is_unitary(u)) throw std::invalid_argument("apply_unitary: matrix is not unitary");
  return assume_density(u * rho.matrix() * u.adjoint());
}

PureState apply_unitary(const PureState& psi, const Matrix& u) {
  if (u.rows() != u.cols() || static_cast<std::size_t>(u.rows()) != psi.dim())
    throw std::invalid_argument("apply_unitary: dimension mismatch");
  if (!is_unitary(u)) throw std::invalid_argument("apply_unitary: matrix is not unitary");
  Vector out = u * psi.amplitudes();
  out.normalize();
  return PureState(std::move(out));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return assume_density(kron(a.matrix(), b.matrix()));
}

PureState tensor(const PureState& a, const PureState& b) {
  Vector out(a.amplitudes().size() * b.amplitudes().size());
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i)
    out.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
  out.normalize();
  return PureState(std::move(out));
}

Matrix embed(const Matrix& op, std::span<const std::size_t> dims, std::size_t subsystem) {
  if (subsystem >= dims.size()) throw std::invalid_argument("embed: subsystem out of range");
  if (static_cast<std::size_t>(op.rows()) != dims[subsystem] || op.rows() != op.cols())
    throw std::invalid_argument("embed: operator does not match factor dimension");
  Matrix out = identity(1);
  for (std::size_t k = 0; k < dims.size(); ++k) out = kron(out, k == subsystem ? op : identity(dims[k]));
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::size_t> keep,
                            std::span<const std::size_t> dims) {
  const std::size_t full = product(dims);
  if (full != rho.dim()) throw std::invalid_argument("partial_trace: dims do not match matrix dimension");
  std::vector<bool> kept(dims.size(), false);
  for (std::size_t k : keep) {
    if (k >= dims.size()) throw std::invalid_argument("partial_trace: subsystem out of range");
    kept[k] = true;
  }

  // Split each full index into (kept index, traced index) once.
  std::vector<std::size_t> keep_idx(full), trace_idx(full);
  std::size_t keep_dim = 1;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (kept[k]) keep_dim *= dims[k];
  for (std::size_t i = 0; i < full; ++i) {
    std::size_t rem = i, kpos = 0, tpos = 0, kmul = 1, tmul = 1;
    for (std::size_t k = dims.size(); k-- > 0;) {
      const std::size_t digit = rem % dims[k];
      rem /= dims[k];
      if (kept[k]) {
        kpos += digit * kmul;
        kmul *= dims[k];
      } else {
        tpos += digit * tmul;
        tmul *= dims[k];
      }
    }
    keep_idx[i] = kpos;
    trace_idx[i] = tpos;
  }

  const auto n = static_cast<Eigen::Index>(keep_dim);
  Matrix out = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < full; ++i)
    for (std::size_t j = 0; j < full; ++j)
      if (trace_idx[i] == trace_idx[j])
        out(static_cast<Eigen::Index>(keep_idx[i]), static_cast<Eigen::Index>(keep_idx[j])) +=
            rho(i, j);
  return assume_density(std::move(out));
}

QubitBasis qubit_basis(Basis b) { return {basis_ket(b, 0), basis_ket(b, 1)}; }

namespace {

Matrix projector(const Vector& v) { return v * v.adjoint(); }

}  // namespace

std::array<double, 2> born_probabilities(const DensityMatrix& rho, const QubitBasis& basis,
                                         std::span<const std::size_t> dims, std::size_t subsystem) {
  if (subsystem >= dims.size() || dims[subsystem] != 2)
    throw std::invalid_argument("born_probabilities: subsystem is not a qubit");
  const Matrix p0 = embed(projector(basis.zero), dims, subsystem);
  const double prob0 = std::clamp((p0 * rho.matrix()).trace().real(), 0.0, 1.0);
  return {prob0, 1.0 - prob0};
}

std::array<double, 2> born_probabilities(const DensityMatrix& rho, Basis b) {
  const std::array<std::size_t, 1> dims{2};
  return born_probabilities(rho, qubit_basis(b), dims, 0);
}

int sample_outcome(const std::array<double, 2>& probs, Rng& rng) {
  return rng.uniform() < probs[0] ? 0 : 1;
}

PureMeasurement measure_projective(const PureState& psi, Basis b, Rng& rng) {
  if (psi.dim() != 2) throw std::invalid_argument("measure_projective: expected a qubit");
  const Vector v0 = basis_ket(b, 0);
  const double p0 = std::clamp(std::norm(v0.dot(psi.amplitudes())), 0.0, 1.0);
  const int outcome = sample_outcome({p0, 1.0 - p0}, rng);
  return {outcome, PureState(basis_ket(b, outcome))};
}

MixedMeasurement measure_projective(const DensityMatrix& rho, Basis b, Rng& rng) {
  const std::array<std::size_t, 1> dims{2};
  return measure_projective(rho, qubit_basis(b), dims, 0, rng);
}

MixedMeasurement measure_projective(const DensityMatrix& rho, const QubitBasis& basis,
                                    std::span<const std::size_t> dims, std::size_t subsystem,
                                    Rng& rng) {
  const auto probs = born_probabilities(rho, basis, dims, subsystem);
  const int outcome = sample_outcome(probs, rng);
  const Matrix p = embed(projector(outcome ? basis.one : basis.zero), dims, subsystem);
  Matrix post = p * rho.matrix() * p;
  const double norm = post.trace().real();
  // A zero-probability outcome is never drawn unless rounding put p0 at an
  // exact boundary; fall back to the projector itself.
  if (norm <= 0.0) {
    post = p / p.trace().real();
  } else {
    post /= norm;
  }
  return {outcome, assume_density(std::move(post))};
}

double von_neumann_entropy(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double lambda = es.eigenvalues()(i);
    if (lambda < -kPsdTol) throw std::domain_error("von_neumann_entropy: negative eigenvalue");
    lambda = std::clamp(lambda, 0.0, 1.0);
    if (lambda > 0.0) s -= lambda * std::log2(lambda);
  }
  return std::max(s, 0.0);
}

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("binary_entropy: argument outside [0, 1]");
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return term(x) + term(1.0 - x);
}

Matrix random_unitary(std::size_t dim, Rng& rng) {
  if (dim == 0) throw std::invalid_argument("random_unitary: dim must be positive");
  const auto n = static_cast<Eigen::Index>(dim);
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = Complex(rng.normal(), rng.normal()) / std::sqrt(2.0);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    const double mag = std::abs(d);
    q.col(j) *= mag > 0.0 ? d / mag : Complex(1.0, 0.0);
  }
  return q;
}

}  // namespace dqkd::qm
