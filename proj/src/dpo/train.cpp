#include "capforge/dpo/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "capforge/dpo/loss.hpp"

namespace capforge {

namespace {

double table_log_prob(const std::vector<double>& table, int vocab, const ToyExample& ex,
                      const std::vector<int>& tokens) {
  double total = 0.0;
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto c = static_cast<std::size_t>(ex.context[j % ex.context.size()]);
    total += table.at(c * static_cast<std::size_t>(vocab) + static_cast<std::size_t>(tokens[j]));
  }
  return total;
}

}  // namespace

double preference_accuracy(const ToyPolicy& policy, std::span<const ToyExample> data) {
  if (data.empty()) return 0.0;
  const auto table = policy.log_softmax_table();
  std::size_t correct = 0;
  for (const auto& ex : data) {
    if (table_log_prob(table, policy.vocab(), ex, ex.chosen) > table_log_prob(table, policy.vocab(), ex, ex.rejected)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_dpo_loss(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const ToyExample> data, double beta) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& ex : data) sum += dpo_loss(dpo_item(policy, ref, ex.context, ex.chosen, ex.rejected), beta);
  return sum / static_cast<double>(data.size());
}

namespace {

json divergence_state(long step, int epoch, std::size_t batch, double lr, double loss, const ToyPolicy& policy,
                      std::span<const std::size_t> items) {
  double max_abs = 0.0;
  bool finite = true;
  for (double v : policy.logits()) {
    finite = finite && std::isfinite(v);
    max_abs = std::max(max_abs, std::abs(v));
  }
  return json{{"step", step},
              {"epoch", epoch},
              {"batch", batch},
              {"lr", lr},
              {"loss", std::isfinite(loss) ? json(loss) : json(std::to_string(loss))},
              {"logits_finite", finite},
              {"max_abs_logit", max_abs},
              {"batch_items", std::vector<std::size_t>(items.begin(), items.end())}};
}

}  // namespace

TrainResult train(const ToyPolicy& init, const ToyPolicy& ref, std::span<const ToyExample> data,
                  const TrainSchedule& schedule, Ordering ordering) {
  schedule.validate();
  if (init.vocab() != ref.vocab() || init.contexts() != ref.contexts()) {
    throw PreconditionError("policy and reference shapes differ");
  }
  std::vector<int> deltas;
  deltas.reserve(data.size());
  for (const auto& ex : data) deltas.push_back(ex.delta);

  TrainResult result{init, {}, preference_accuracy(init, data), 0.0, 0.0};
  ToyPolicy& policy = result.policy;
  const auto per_epoch = static_cast<long>(num_batches(data.size(), schedule.batch_size));
  const long total = per_epoch * schedule.epochs;
  std::vector<double> grad(policy.logits().size());

  long step = 0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto order = epoch_order(deltas, ordering, schedule.seed, epoch, schedule.reapply_order_each_epoch);
    const auto batches = make_batches(order, schedule.batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b, ++step) {
      const auto& batch = batches[b];
      const double lr = cosine_lr(step, total, schedule.warmup_frac, schedule.lr0);
      const double weight = 1.0 / static_cast<double>(batch.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (auto i : batch) {
        const auto& ex = data[i];
        loss += accumulate_dpo(policy, ref, ex.context, ex.chosen, ex.rejected, schedule.beta, weight, grad);
      }
      loss *= weight;
      const bool grad_ok = std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
      if (!std::isfinite(loss) || !grad_ok) {
        throw TrainingDiverged("training diverged at step " + std::to_string(step),
                               divergence_state(step, epoch, b, lr, loss, policy, batch));
      }
      auto logits = policy.logits();
      for (std::size_t k = 0; k < logits.size(); ++k) logits[k] -= lr * grad[k];
      result.trace.push_back({step, lr, loss, preference_accuracy(policy, data)});
    }
  }
  result.final_pref_acc = preference_accuracy(policy, data);
  result.final_loss = mean_dpo_loss(policy, ref, data, schedule.beta);
  return result;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::string out = "step,lr,loss,pref_acc\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", r.step, r.lr, r.loss, r.pref_acc);
    out += buf;
  }
  return out;
}

}  // namespace capforge
