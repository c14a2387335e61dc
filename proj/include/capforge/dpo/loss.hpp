#pragma once

#include <span>
#include <vector>

#include "capforge/dpo/policy.hpp"

namespace capforge {

/// log(1 + e^z) without overflow.
double softplus(double z);

/// 1 / (1 + e^-z) without overflow.
double sigmoid(double z);

struct DpoBatchItem {
  double logp_chosen_theta = 0.0;
  double logp_rejected_theta = 0.0;
  double logp_chosen_ref = 0.0;
  double logp_rejected_ref = 0.0;
  int delta = 0;

  /// (log pi(y+) - log pi(y-)) - (log ref(y+) - log ref(y-))
  double margin() const {
    return (logp_chosen_theta - logp_rejected_theta) - (logp_chosen_ref - logp_rejected_ref);
  }
};

/// -log sigmoid(beta * m), evaluated as softplus(-beta * m). Requires beta > 0.
double dpo_loss(const DpoBatchItem& item, double beta);

DpoBatchItem dpo_item(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                      std::span<const int> chosen, std::span<const int> rejected, int delta = 0);

/// Exact gradient of dpo_loss with respect to every logit of `policy`:
///   -beta * sigmoid(-beta m) * (grad log pi(y+|x) - grad log pi(y-|x)).
/// Laid out like ToyPolicy::logits().
std::vector<double> dpo_grad(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                             std::span<const int> chosen, std::span<const int> rejected, double beta);

/// Adds `weight` times the gradient into `grad` and returns the loss.
double accumulate_dpo(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const int> context,
                      std::span<const int> chosen, std::span<const int> rejected, double beta, double weight,
                      std::span<double> grad);

}  // namespace capforge
