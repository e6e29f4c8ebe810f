#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <unordered_set>
#include <vector>

#include "dream/core/error.hpp"
#include "dream/core/random.hpp"
#include "dream/sim/world.hpp"

namespace dream::replay {

struct Experience {
  std::array<double, sim::kObservationSize> s{};
  std::array<double, 2> a{};  // raw network action in [-1, 1]^2
  double r = 0.0;
  std::array<double, sim::kObservationSize> s_next{};
  bool done = false;
};

enum class Category : std::size_t { Positive = 0, Neutral = 1, Negative = 2 };

struct CategoryThresholds {
  double positive = 100.0;  // r >= positive
  double negative = -50.0;  // r <= negative
};

inline Category classify(double r, const CategoryThresholds& t = {}) {
  if (r >= t.positive) return Category::Positive;
  if (r <= t.negative) return Category::Negative;
  return Category::Neutral;
}

// Fixed-capacity FIFO ring.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw usage_error("RingBuffer: capacity must be > 0");
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // Element i in insertion order (0 = oldest).
  const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

using Quota = std::array<std::size_t, 3>;

// n+ = floor(len+ / N * b), n0 = floor(len0 / N * b), n- = b - n+ - n0.
// Integer form of the floor avoids rounding drift: floor(len * b / N).
inline Quota proportional_quota(const Quota& lens, std::size_t b) {
  const std::size_t n = lens[0] + lens[1] + lens[2];
  if (b == 0) throw usage_error("sample: batch size must be >= 1");
  if (n < b) throw insufficient_data_error("sample: buffer holds " + std::to_string(n) +
                                           " experiences, batch needs " + std::to_string(b));
  Quota q{};
  q[0] = lens[0] * b / n;
  q[1] = lens[1] * b / n;
  q[2] = b - q[0] - q[1];
  return q;
}

// Optional floor on the quota of every non-empty category, paid for by the currently largest
// quota. 0 leaves the proportional quota untouched.
inline Quota apply_min_quota(Quota q, const Quota& lens, std::size_t min_quota) {
  if (min_quota == 0) return q;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t want = std::min(min_quota, lens[c]);
    while (q[c] < want) {
      std::size_t donor = 3;
      for (std::size_t d = 0; d < 3; ++d) {
        if (d == c) continue;
        const std::size_t floor_d = std::min(min_quota, lens[d]);
        if (q[d] > floor_d && (donor == 3 || q[d] > q[donor])) donor = d;
      }
      if (donor == 3) break;
      --q[donor];
      ++q[c];
    }
  }
  return q;
}

// Moves any quota a sub-buffer cannot serve to the sub-buffer with the most spare experiences.
inline Quota redistribute(Quota q, const Quota& lens) {
  std::size_t shortfall = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (q[c] > lens[c]) {
      shortfall += q[c] - lens[c];
      q[c] = lens[c];
    }
  }
  while (shortfall > 0) {
    std::size_t best = 0;
    std::size_t best_spare = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t spare = lens[c] - q[c];
      if (spare > best_spare) {
        best = c;
        best_spare = spare;
      }
    }
    if (best_spare == 0) throw insufficient_data_error("sample: no spare experiences to redistribute");
    const std::size_t moved = std::min(shortfall, best_spare);
    q[best] += moved;
    shortfall -= moved;
  }
  return q;
}

// k distinct indices from [0, n), Floyd's algorithm; order follows selection.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, rng_t& rng) {
  std::vector<std::size_t> out;
  out.reserve(k);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

struct BufferStats {
  std::size_t positive = 0;
  std::size_t neutral = 0;
  std::size_t negative = 0;

  std::size_t total() const { return positive + neutral + negative; }
};

// Reward Categorized Replay Buffer: three FIFO sub-buffers, sampled in proportion to their sizes.
class CategorizedBuffer {
 public:
  explicit CategorizedBuffer(std::size_t capacity_per_category = 100000,
                             CategoryThresholds thresholds = {}, std::size_t min_quota = 0)
      : thresholds_(thresholds),
        min_quota_(min_quota),
        buffers_{RingBuffer<Experience>(capacity_per_category), RingBuffer<Experience>(capacity_per_category),
                 RingBuffer<Experience>(capacity_per_category)} {}

  void push(Experience e) {
    buffers_[static_cast<std::size_t>(classify(e.r, thresholds_))].push(std::move(e));
  }

  std::size_t size() const { return buffers_[0].size() + buffers_[1].size() + buffers_[2].size(); }
  std::size_t size(Category c) const { return buffers_[static_cast<std::size_t>(c)].size(); }
  const RingBuffer<Experience>& sub_buffer(Category c) const { return buffers_[static_cast<std::size_t>(c)]; }
  const CategoryThresholds& thresholds() const { return thresholds_; }

  Quota lengths() const { return {buffers_[0].size(), buffers_[1].size(), buffers_[2].size()}; }
  BufferStats stats() const { return {buffers_[0].size(), buffers_[1].size(), buffers_[2].size()}; }

  // Final per-category counts used by sample() for batch size b.
  Quota quota(std::size_t b) const {
    return redistribute(apply_min_quota(proportional_quota(lengths(), b), lengths(), min_quota_), lengths());
  }
  std::size_t min_quota() const { return min_quota_; }

  std::vector<Experience> sample(std::size_t b, rng_t& rng) const {
    const Quota q = quota(b);
    std::vector<Experience> batch;
    batch.reserve(b);
    for (std::size_t c = 0; c < 3; ++c) {
      if (q[c] == 0) continue;
      for (std::size_t idx : sample_without_replacement(buffers_[c].size(), q[c], rng)) {
        batch.push_back(buffers_[c][idx]);
      }
    }
    return batch;
  }

 private:
  CategoryThresholds thresholds_;
  std::size_t min_quota_ = 0;
  std::array<RingBuffer<Experience>, 3> buffers_;
};

}  // namespace dream::replay
