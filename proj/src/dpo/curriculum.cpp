#include "capforge/dpo/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "capforge/core/rng.hpp"

namespace capforge {

std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::kCurriculum: return "curriculum";
    case Ordering::kShuffled: return "shuffled";
    case Ordering::kAnti: return "anti";
  }
  throw InvariantError("bad Ordering");
}

Ordering parse_ordering(std::string_view s) {
  if (s == "curriculum") return Ordering::kCurriculum;
  if (s == "shuffled") return Ordering::kShuffled;
  if (s == "anti") return Ordering::kAnti;
  throw std::invalid_argument("unknown ordering '" + std::string(s) + "' (expected curriculum, shuffled or anti)");
}

namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

std::vector<std::size_t> curriculum_order(std::span<const int> deltas) {
  auto idx = iota(deltas.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return deltas[a] > deltas[b]; });
  return idx;
}

std::vector<std::size_t> curriculum_order(std::span<const PreferenceTuple> tuples) {
  std::vector<int> deltas;
  deltas.reserve(tuples.size());
  for (const auto& t : tuples) deltas.push_back(t.delta);
  return curriculum_order(deltas);
}

std::vector<std::size_t> anti_curriculum_order(std::span<const int> deltas) {
  auto idx = iota(deltas.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return deltas[a] < deltas[b]; });
  return idx;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  auto idx = iota(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<std::size_t> epoch_order(std::span<const int> deltas, Ordering ordering, std::uint64_t seed, int epoch,
                                     bool reapply) {
  switch (ordering) {
    case Ordering::kCurriculum: return curriculum_order(deltas);
    case Ordering::kAnti: return anti_curriculum_order(deltas);
    case Ordering::kShuffled: {
      const int e = reapply ? epoch : 0;
      return shuffled_order(deltas.size(), derive_seed(seed, "shuffle/epoch" + std::to_string(e)));
    }
  }
  throw InvariantError("bad Ordering");
}

std::size_t num_batches(std::size_t n, int batch_size) {
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  const auto b = static_cast<std::size_t>(batch_size);
  return (n + b - 1) / b;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, int batch_size) {
  const auto count = num_batches(order.size(), batch_size);
  const auto b = static_cast<std::size_t>(batch_size);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(count);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const auto end = std::min(order.size(), start + b);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

double cosine_lr(long step, long total_steps, double warmup_frac, double lr0) {
  if (step < 0 || step >= total_steps) {
    throw std::out_of_range("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + ")");
  }
  const auto warmup = static_cast<long>(std::ceil(warmup_frac * static_cast<double>(total_steps)));
  if (step < warmup) return lr0 * static_cast<double>(step) / static_cast<double>(warmup);
  const long span = total_steps - 1 - warmup;
  const double u = span <= 0 ? 0.0 : static_cast<double>(step - warmup) / static_cast<double>(span);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

}  // namespace capforge
