#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "capforge/core/config.hpp"
#include "capforge/dpo/curriculum.hpp"
#include "capforge/dpo/policy.hpp"
#include "capforge/dpo/toy_data.hpp"

namespace capforge {

struct TraceRow {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;      // mean batch loss before the update
  double pref_acc = 0.0;  // over the whole dataset after the update
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<TraceRow> trace;
  double initial_pref_acc = 0.0;
  double final_pref_acc = 0.0;
  double final_loss = 0.0;  // mean loss over the whole dataset after training
};

/// Raised when a batch loss or gradient stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, json state) : std::runtime_error(what), state_(std::move(state)) {}
  const json& state() const { return state_; }

 private:
  json state_;
};

/// Fraction of pairs with log pi(chosen) > log pi(rejected).
double preference_accuracy(const ToyPolicy& policy, std::span<const ToyExample> data);

/// Mean DPO loss over the whole dataset.
double mean_dpo_loss(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const ToyExample> data, double beta);

/// Plain gradient descent on the mean batch gradient with cosine_lr over
/// epochs * num_batches steps. Items inside a batch are summed in batch order.
TrainResult train(const ToyPolicy& init, const ToyPolicy& ref, std::span<const ToyExample> data,
                  const TrainSchedule& schedule, Ordering ordering);

/// CSV "step,lr,loss,pref_acc" with 17 significant digits.
std::string trace_csv(std::span<const TraceRow> trace);

}  // namespace capforge
