#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "capforge/core/types.hpp"

namespace capforge {

/// One preference pair in toy-vocabulary form.
struct ToyExample {
  std::vector<int> context;
  std::vector<int> chosen;
  std::vector<int> rejected;
  int delta = 0;
};

/// Synthetic tokenizer for toy training runs.
///
/// A hidden quality ranking of tokens is drawn per context. Every pair gets a
/// random context sequence and a random chosen sequence; the rejected sequence
/// differs at k = clamp(ceil(seq_len * delta / 100), 1, seq_len) positions.
/// At each differing position two distinct tokens are drawn, the better one
/// goes to `chosen`, and with probability label_noise * (1 - delta / 100) the
/// two are swapped. Large gaps therefore give pairs that differ in more
/// places and agree more often with the hidden ranking.
struct ToyDataParams {
  int vocab = 16;
  int contexts = 8;
  int seq_len = 6;
  double label_noise = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

json to_json(const ToyDataParams& p);
ToyDataParams toy_params_from_json(const json& j);

std::vector<ToyExample> tokenize_toy(std::span<const int> deltas, const ToyDataParams& params);
std::vector<ToyExample> tokenize_toy(std::span<const PreferenceTuple> tuples, const ToyDataParams& params);

}  // namespace capforge
