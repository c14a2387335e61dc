#include "capforge/dpo/loss.hpp"

#include <cmath>

#include "capforge/core/types.hpp"

namespace capforge {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dpo_loss(const DpoBatchItem& item, double beta) {
  if (!(beta > 0.0)) throw PreconditionError("beta must be positive");
  return softplus(-beta * item.margin());
}

DpoBatchItem dpo_item(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                      std::span<const int> chosen, std::span<const int> rejected, int delta) {
  return DpoBatchItem{policy.sequence_log_prob(context, chosen), policy.sequence_log_prob(context, rejected),
                      ref.sequence_log_prob(context, chosen), ref.sequence_log_prob(context, rejected), delta};
}

double accumulate_dpo(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                      std::span<const int> chosen, std::span<const int> rejected, double beta, double weight,
                      std::span<double> grad) {
  if (policy.vocab() != ref.vocab() || policy.contexts() != ref.contexts()) {
    throw PreconditionError("policy and reference shapes differ");
  }
  const auto item = dpo_item(policy, ref, context, chosen, rejected);
  const double loss = dpo_loss(item, beta);
  const double coeff = -beta * sigmoid(-beta * item.margin()) * weight;
  policy.add_log_prob_grad(context, chosen, coeff, grad);
  policy.add_log_prob_grad(context, rejected, -coeff, grad);
  return loss;
}

std::vector<double> dpo_grad(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                             std::span<const int> chosen, std::span<const int> rejected, double beta) {
  std::vector<double> grad(policy.logits().size(), 0.0);
  accumulate_dpo(policy, ref, context, chosen, rejected, beta, 1.0, grad);
  return grad;
}

}  // namespace capforge
