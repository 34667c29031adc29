#include "dqkd/postproc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dqkd/qmath.hpp"

namespace dqkd::postproc {

namespace {

using Words = std::vector<std::uint64_t>;

// LSB-first packing with one zero word of padding for window reads.
Words pack(const BitString& bits) {
  Words w(bits.size() / 64 + 2, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & 1u) w[i / 64] |= std::uint64_t{1} << (i % 64);
  return w;
}

std::uint64_t window(const Words& w, std::size_t offset) {
  const std::size_t lo = offset / 64, sh = offset % 64;
  if (sh == 0) return w[lo];
  return (w[lo] >> sh) | (w[lo + 1] << (64 - sh));
}

int parity_of(const BitString& key, std::span<const std::size_t> positions) {
  int p = 0;
  for (std::size_t i : positions) p ^= key[i] & 1;
  return p;
}

}  // namespace

int KeyParitySource::parity(std::span<const std::size_t> positions) { return parity_of(key_, positions); }

BitString KeyParitySource::tag(std::uint64_t seed, std::size_t bits) { return toeplitz_hash(key_, bits, seed); }

std::size_t initial_block_size(double estimated_e, std::size_t n, double block_constant) {
  if (n == 0) return 1;
  if (!(estimated_e > 0.0)) return n;
  const double k = std::ceil(block_constant / estimated_e);
  if (k >= static_cast<double>(n)) return n;
  return std::max<std::size_t>(std::min<std::size_t>(2, n), static_cast<std::size_t>(k));
}

namespace {

class Cascade {
 public:
  Cascade(ParitySource& alice, BitString bob, double e, Rng& rng, const ReconcileParams& params)
      : alice_(alice), bob_(std::move(bob)), rng_(rng), params_(params) {
    k1_ = initial_block_size(e, bob_.size(), params.block_constant);
  }

  ReconciliationResult run() {
    const std::size_t n = bob_.size();
    for (int p = 0; p < params_.passes && n > 0; ++p) {
      Pass pass;
      pass.order.resize(n);
      std::iota(pass.order.begin(), pass.order.end(), std::size_t{0});
      if (p > 0) shuffle(pass.order);
      pass.block = std::min(n, k1_ << p);
      pass.block_of.resize(n);
      for (std::size_t j = 0; j < n; ++j) pass.block_of[pass.order[j]] = j / pass.block;
      const std::size_t n_blocks = (n + pass.block - 1) / pass.block;
      pass.alice_parity.resize(n_blocks);
      passes_.push_back(std::move(pass));

      std::deque<std::pair<std::size_t, std::size_t>> queue;
      for (std::size_t b = 0; b < n_blocks; ++b) {
        passes_.back().alice_parity[b] = ask(block_positions(passes_.size() - 1, b));
        queue.emplace_back(passes_.size() - 1, b);
      }
      drain(queue);
    }

    ReconciliationResult res;
    res.leaked_bits = leaked_;
    res.tag_bits = params_.tag_bits;
    const std::uint64_t tag_seed = rng_();
    const BitString alice_tag = alice_.tag(tag_seed, params_.tag_bits);
    const BitString bob_tag = toeplitz_hash(bob_, params_.tag_bits, tag_seed);
    res.verified = alice_tag == bob_tag;
    if (!res.verified) res.failure_reason = "verification tag mismatch after " + std::to_string(params_.passes) + " passes";
    res.corrected_key = std::move(bob_);
    return res;
  }

 private:
  struct Pass {
    std::vector<std::size_t> order;
    std::vector<std::size_t> block_of;
    std::vector<int> alice_parity;
    std::size_t block = 1;
  };

  void shuffle(std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng_.below(i)]);
  }

  std::span<const std::size_t> block_positions(std::size_t p, std::size_t b) const {
    const auto& pass = passes_[p];
    const std::size_t begin = b * pass.block;
    const std::size_t end = std::min(pass.order.size(), begin + pass.block);
    return std::span<const std::size_t>(pass.order).subspan(begin, end - begin);
  }

  int ask(std::span<const std::size_t> positions) {
    ++leaked_;
    return alice_.parity(positions);
  }

  // Bisect a block whose parities disagree down to one erroneous position.
  std::size_t bisect(std::span<const std::size_t> block, int alice_parity) {
    while (block.size() > 1) {
      const auto left = block.first(block.size() / 2);
      const int a_left = ask(left);
      if (a_left != parity_of(bob_, left)) {
        block = left;
        alice_parity = a_left;
      } else {
        block = block.subspan(left.size());
        alice_parity ^= a_left;
      }
    }
    return block.front();
  }

  void drain(std::deque<std::pair<std::size_t, std::size_t>>& queue) {
    while (!queue.empty()) {
      const auto [p, b] = queue.front();
      queue.pop_front();
      const auto positions = block_positions(p, b);
      const int a = passes_[p].alice_parity[b];
      if (a == parity_of(bob_, positions)) continue;
      const std::size_t pos = bisect(positions, a);
      bob_[pos] ^= 1;
      // The flip changes Bob's parity of the block holding pos in every
      // earlier pass; those blocks may now reveal a further error.
      for (std::size_t q = 0; q < passes_.size(); ++q)
        if (q != p) queue.emplace_back(q, passes_[q].block_of[pos]);
    }
  }

  ParitySource& alice_;
  BitString bob_;
  Rng& rng_;
  ReconcileParams params_;
  std::size_t k1_ = 1;
  std::size_t leaked_ = 0;
  std::vector<Pass> passes_;
};

}  // namespace

ReconciliationResult reconcile(ParitySource& alice, const BitString& bob_key, double estimated_e, Rng& rng,
                               const ReconcileParams& params) {
  if (params.passes < 1) throw std::invalid_argument("reconcile: need at least one pass");
  return Cascade(alice, bob_key, estimated_e, rng, params).run();
}

ReconciliationResult reconcile(const BitString& alice_key, const BitString& bob_key, double estimated_e, Rng& rng,
                               const ReconcileParams& params) {
  if (alice_key.size() != bob_key.size()) throw std::invalid_argument("reconcile: keys differ in length");
  KeyParitySource source(alice_key);
  return reconcile(source, bob_key, estimated_e, rng, params);
}

BitString toeplitz_bits(std::uint64_t seed, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) return {};
  Rng rng(seed);
  BitString t(n + m - 1);
  for (auto& b : t) b = static_cast<std::uint8_t>(rng.bit());
  return t;
}

BitString toeplitz_hash(const BitString& key, std::size_t out_bits, std::uint64_t seed) {
  const std::size_t n = key.size();
  if (n == 0 || out_bits == 0) return BitString(out_bits, 0);
  const BitString t = toeplitz_bits(seed, n, out_bits);
  // Row i is t[i + n - 1 - j] over j, i.e. t[i .. i + n) against the
  // reversed key.
  BitString reversed(key.rbegin(), key.rend());
  const Words kw = pack(reversed);
  const Words tw = pack(t);
  const std::size_t n_words = (n + 63) / 64;
  BitString out(out_bits);
  for (std::size_t i = 0; i < out_bits; ++i) {
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < n_words; ++w) acc ^= window(tw, i + 64 * w) & kw[w];
    out[i] = static_cast<std::uint8_t>(std::popcount(acc) & 1);
  }
  return out;
}

FinalKey privacy_amplify(const BitString& key, double xi, std::size_t ec_leak, std::size_t margin,
                         std::uint64_t seed) {
  if (!(xi >= 0.5)) throw std::invalid_argument("privacy_amplify: xi below 1/2");
  xi = std::min(xi, 1.0);
  FinalKey out;
  const double n = static_cast<double>(key.size());
  out.accounting = {key.size(), ec_leak, n * qm::binary_entropy(xi), margin};
  const double budget = std::floor(n * (1.0 - qm::binary_entropy(xi)) - static_cast<double>(ec_leak) -
                                   static_cast<double>(margin));
  if (budget <= 0.0) {
    out.abort = true;
    out.reason = "no secret bits left after error-correction leakage and privacy amplification";
    return out;
  }
  out.length = static_cast<std::size_t>(budget);
  out.bits = toeplitz_hash(key, out.length, seed);
  return out;
}

}  // namespace dqkd::postproc
