#pragma once

// Error correction and privacy amplification for raw keys.
//
// Reconciliation is Cascade-style parity bisection: Bob corrects his key
// against parities of Alice's key, every parity Alice discloses is counted,
// and a final hash tag decides whether the keys agree. Privacy amplification
// is a seeded Toeplitz hash over GF(2).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "dqkd/bits.hpp"
#include "dqkd/rng.hpp"

namespace dqkd::postproc {

/// Alice's side of the public channel.
class ParitySource {
 public:
  virtual ~ParitySource() = default;
  /// Parity of Alice's bits at `positions`; each call discloses one bit.
  virtual int parity(std::span<const std::size_t> positions) = 0;
  /// Toeplitz hash of Alice's key used as the verification tag.
  virtual BitString tag(std::uint64_t seed, std::size_t bits) = 0;
};

class KeyParitySource final : public ParitySource {
 public:
  explicit KeyParitySource(const BitString& key) : key_(key) {}
  int parity(std::span<const std::size_t> positions) override;
  BitString tag(std::uint64_t seed, std::size_t bits) override;

 private:
  const BitString& key_;
};

struct ReconcileParams {
  int passes = 4;
  /// First-pass block size is ceil(block_constant / e).
  double block_constant = 0.73;
  std::size_t tag_bits = 64;
};

struct ReconciliationResult {
  BitString corrected_key;
  /// Parities Alice disclosed (top-level and bisection).
  std::size_t leaked_bits = 0;
  /// Length of the verification tag, disclosed on top of leaked_bits.
  std::size_t tag_bits = 0;
  bool verified = false;
  std::string failure_reason;
};

/// First-pass block size for an estimated error rate, clamped to [2, n]
/// (n when e is 0).
std::size_t initial_block_size(double estimated_e, std::size_t n, double block_constant = 0.73);

/// Bob corrects `bob_key` against `alice`. Shuffles for later passes come
/// from `rng` (public randomness both sides share). A tag mismatch after the
/// last pass is reported as verified = false.
ReconciliationResult reconcile(ParitySource& alice, const BitString& bob_key, double estimated_e, Rng& rng,
                               const ReconcileParams& params = {});
ReconciliationResult reconcile(const BitString& alice_key, const BitString& bob_key, double estimated_e, Rng& rng,
                               const ReconcileParams& params = {});

/// Seeded m x n Toeplitz matrix over GF(2): entry (i, j) is t[i - j + n - 1]
/// for n + m - 1 generator bits t.
BitString toeplitz_bits(std::uint64_t seed, std::size_t n, std::size_t m);
/// T * key mod 2 for the Toeplitz matrix of `seed`.
BitString toeplitz_hash(const BitString& key, std::size_t out_bits, std::uint64_t seed);

struct KeyAccounting {
  std::size_t n_raw = 0;
  std::size_t ec_leak = 0;
  /// n_raw * h(xi), the privacy-amplification sacrifice.
  double pa_removed = 0;
  std::size_t margin = 0;
};

struct FinalKey {
  BitString bits;
  std::size_t length = 0;
  KeyAccounting accounting;
  bool abort = false;
  std::string reason;
};

inline constexpr std::size_t kDefaultMargin = 32;

/// length = max(0, floor(n_raw * (1 - h(xi)) - ec_leak - margin)); the key is
/// hashed down to that length. A non-positive length yields an empty key
/// with abort set. Throws std::invalid_argument if xi < 1/2.
FinalKey privacy_amplify(const BitString& key, double xi, std::size_t ec_leak, std::size_t margin,
                         std::uint64_t seed);

}  // namespace dqkd::postproc
