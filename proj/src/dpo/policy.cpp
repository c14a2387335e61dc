#include "capforge/dpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "capforge/core/rng.hpp"
#include "capforge/core/types.hpp"

namespace capforge {

ToyPolicy::ToyPolicy(int vocab, int contexts) : vocab_(vocab), contexts_(contexts) {
  if (vocab < 2 || contexts < 1) throw PreconditionError("toy policy needs vocab >= 2 and contexts >= 1");
  logits_.assign(static_cast<std::size_t>(vocab) * static_cast<std::size_t>(contexts), 0.0);
}

ToyPolicy ToyPolicy::random(int vocab, int contexts, double scale, std::uint64_t seed) {
  ToyPolicy p(vocab, contexts);
  std::mt19937_64 rng(seed);
  for (auto& v : p.logits_) v = scale * (2.0 * uniform_unit(rng) - 1.0);
  return p;
}

std::vector<double> ToyPolicy::log_softmax(int context) const {
  if (context < 0 || context >= contexts_) throw std::out_of_range("context id out of range");
  const auto row = std::span<const double>(logits_).subspan(index(context, 0), static_cast<std::size_t>(vocab_));
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lse;
  return out;
}

std::vector<double> ToyPolicy::log_softmax_table() const {
  std::vector<double> out;
  out.reserve(logits_.size());
  for (int c = 0; c < contexts_; ++c) {
    const auto row = log_softmax(c);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

void ToyPolicy::check(std::span<const int> context, std::span<const int> tokens) const {
  if (context.empty() || tokens.empty()) throw PreconditionError("context and token sequences must be non-empty");
  for (int c : context) {
    if (c < 0 || c >= contexts_) throw std::out_of_range("context id " + std::to_string(c) + " out of range");
  }
  for (int t : tokens) {
    if (t < 0 || t >= vocab_) throw std::out_of_range("token " + std::to_string(t) + " out of range");
  }
}

double ToyPolicy::sequence_log_prob(std::span<const int> context, std::span<const int> tokens) const {
  check(context, tokens);
  double total = 0.0;
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto row = log_softmax(context[j % context.size()]);
    total += row[static_cast<std::size_t>(tokens[j])];
  }
  return total;
}

void ToyPolicy::add_log_prob_grad(std::span<const int> context, std::span<const int> tokens, double weight,
                                  std::span<double> grad) const {
  check(context, tokens);
  if (grad.size() != logits_.size()) throw PreconditionError("gradient buffer has the wrong shape");
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const int c = context[j % context.size()];
    const auto row = log_softmax(c);
    // d/dz_v log softmax(z)[y] = [v == y] - softmax(z)[v]
    for (int v = 0; v < vocab_; ++v) {
      grad[index(c, v)] -= weight * std::exp(row[static_cast<std::size_t>(v)]);
    }
    grad[index(c, tokens[j])] += weight;
  }
}

}  // namespace capforge
