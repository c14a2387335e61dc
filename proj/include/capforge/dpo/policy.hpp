#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace capforge {

/// Context-table categorical sequence model.
///
/// Holds a C x V logit table. A sequence y under context sequence x scores
///   log pi(y | x) = sum_j log_softmax(logits[x[j mod |x|]])[y[j]]
/// so gradients with respect to every logit are exact and cheap.
class ToyPolicy {
 public:
  ToyPolicy(int vocab, int contexts);

  /// Logits drawn uniformly from [-scale, scale].
  static ToyPolicy random(int vocab, int contexts, double scale, std::uint64_t seed);

  int vocab() const { return vocab_; }
  int contexts() const { return contexts_; }

  double logit(int context, int token) const { return logits_[index(context, token)]; }
  double& logit(int context, int token) { return logits_[index(context, token)]; }

  std::span<const double> logits() const { return logits_; }
  std::span<double> logits() { return logits_; }

  /// log-softmax of one context row.
  std::vector<double> log_softmax(int context) const;

  /// Every row's log-softmax, laid out like logits().
  std::vector<double> log_softmax_table() const;

  /// Throws std::out_of_range for bad ids, PreconditionError for empty input.
  double sequence_log_prob(std::span<const int> context, std::span<const int> tokens) const;

  /// grad += weight * d/dlogits log pi(tokens | context).
  void add_log_prob_grad(std::span<const int> context, std::span<const int> tokens, double weight,
                         std::span<double> grad) const;

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  std::size_t index(int context, int token) const {
    return static_cast<std::size_t>(context) * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(token);
  }
  void check(std::span<const int> context, std::span<const int> tokens) const;

  int vocab_;
  int contexts_;
  std::vector<double> logits_;
};

}  // namespace capforge
