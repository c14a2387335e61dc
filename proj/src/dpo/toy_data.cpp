#include "capforge/dpo/toy_data.hpp"

#include <algorithm>
#include <cmath>

#include "capforge/core/rng.hpp"
#include "capforge/dpo/curriculum.hpp"

namespace capforge {

void ToyDataParams::validate() const {
  if (vocab < 2) throw PreconditionError("toy vocab must be >= 2");
  if (contexts < 1) throw PreconditionError("toy contexts must be >= 1");
  if (seq_len < 1) throw PreconditionError("toy seq_len must be >= 1");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw PreconditionError("label_noise must lie in [0, 1]");
}

json to_json(const ToyDataParams& p) {
  return json{{"vocab", p.vocab},
              {"contexts", p.contexts},
              {"seq_len", p.seq_len},
              {"label_noise", p.label_noise},
              {"seed", p.seed}};
}

ToyDataParams toy_params_from_json(const json& j) {
  ToyDataParams p;
  p.vocab = j.value("vocab", p.vocab);
  p.contexts = j.value("contexts", p.contexts);
  p.seq_len = j.value("seq_len", p.seq_len);
  p.label_noise = j.value("label_noise", p.label_noise);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

std::vector<ToyExample> tokenize_toy(std::span<const int> deltas, const ToyDataParams& params) {
  params.validate();
  // rank[c][v]: higher is better
  std::vector<std::vector<std::size_t>> rank(static_cast<std::size_t>(params.contexts));
  for (int c = 0; c < params.contexts; ++c) {
    const auto perm =
        shuffled_order(static_cast<std::size_t>(params.vocab), derive_seed(params.seed, "rank/" + std::to_string(c)));
    auto& r = rank[static_cast<std::size_t>(c)];
    r.resize(perm.size());
    for (std::size_t pos = 0; pos < perm.size(); ++pos) r[perm[pos]] = pos;
  }

  const auto len = static_cast<std::size_t>(params.seq_len);
  std::vector<ToyExample> out;
  out.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const int delta = deltas[i];
    std::mt19937_64 rng(derive_seed(params.seed, "pair/" + std::to_string(i)));
    ToyExample ex;
    ex.delta = delta;
    for (std::size_t j = 0; j < len; ++j) ex.context.push_back(uniform_int(rng, 0, params.contexts - 1));
    for (std::size_t j = 0; j < len; ++j) ex.chosen.push_back(uniform_int(rng, 0, params.vocab - 1));
    ex.rejected = ex.chosen;

    const double frac = std::clamp(delta, 0, 100) / 100.0;
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(static_cast<double>(len) * frac)), 1, len);
    const double flip = params.label_noise * (1.0 - frac);
    const auto positions = shuffled_order(len, rng());
    for (std::size_t n = 0; n < k; ++n) {
      const auto j = positions[n];
      const auto& r = rank[static_cast<std::size_t>(ex.context[j])];
      int a = uniform_int(rng, 0, params.vocab - 1);
      int b = uniform_int(rng, 0, params.vocab - 2);
      if (b >= a) ++b;
      if (r[static_cast<std::size_t>(a)] < r[static_cast<std::size_t>(b)]) std::swap(a, b);
      if (uniform_unit(rng) < flip) std::swap(a, b);
      ex.chosen[j] = a;
      ex.rejected[j] = b;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ToyExample> tokenize_toy(std::span<const PreferenceTuple> tuples, const ToyDataParams& params) {
  std::vector<int> deltas;
  deltas.reserve(tuples.size());
  for (const auto& t : tuples) deltas.push_back(t.delta);
  return tokenize_toy(deltas, params);
}

}  // namespace capforge
