#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capforge/core/types.hpp"

namespace capforge {

enum class Ordering { kCurriculum, kShuffled, kAnti };

std::string_view to_string(Ordering o);
/// Throws std::invalid_argument for unknown names.
Ordering parse_ordering(std::string_view s);

/// Stable sort of indices by delta, largest first. Ties keep input order.
std::vector<std::size_t> curriculum_order(std::span<const int> deltas);
std::vector<std::size_t> curriculum_order(std::span<const PreferenceTuple> tuples);

/// Smallest delta first, ties keep input order.
std::vector<std::size_t> anti_curriculum_order(std::span<const int> deltas);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

/// Visiting order for one epoch. With `reapply` the ordering is recomputed
/// every epoch (a fresh permutation for kShuffled); otherwise epoch 0's order
/// is reused.
std::vector<std::size_t> epoch_order(std::span<const int> deltas, Ordering ordering, std::uint64_t seed, int epoch,
                                     bool reapply);

/// Consecutive chunks of `order`; the last may be short. Throws
/// PreconditionError when batch_size < 1.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, int batch_size);

std::size_t num_batches(std::size_t n, int batch_size);

/// Linear warmup over ceil(warmup_frac * total) steps, then cosine decay to
/// zero at the final step. Throws std::out_of_range unless 0 <= step < total.
double cosine_lr(long step, long total_steps, double warmup_frac, double lr0);

}  // namespace capforge
