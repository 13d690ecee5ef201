#include "longmab/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "longmab/errors.hpp"

namespace longmab {

std::string_view to_string(MuUpdateMode mode) {
  switch (mode) {
    case MuUpdateMode::verbatim_global_t:
      return "verbatim_global_t";
    case MuUpdateMode::per_arm_mean:
      return "per_arm_mean";
  }
  return "unknown";
}

MuUpdateMode parse_mu_update_mode(std::string_view name) {
  if (name == "verbatim_global_t") return MuUpdateMode::verbatim_global_t;
  if (name == "per_arm_mean") return MuUpdateMode::per_arm_mean;
  throw ConfigError("unknown mu update mode: " + std::string(name));
}

std::vector<double> BanditState::mu() const {
  std::vector<double> out;
  out.reserve(arms.size());
  for (const auto& arm : arms) out.push_back(arm.mu);
  return out;
}

std::vector<std::int64_t> BanditState::counts() const {
  std::vector<std::int64_t> out;
  out.reserve(arms.size());
  for (const auto& arm : arms) out.push_back(arm.n);
  return out;
}

BanditState init_state(std::span<const double> initial_mu, const BanditParams& params) {
  if (initial_mu.empty()) throw std::invalid_argument("init_state: no arms");
  if (!(params.epsilon > 0.0)) throw std::invalid_argument("init_state: epsilon must be > 0");
  if (!(params.alpha >= 0.0)) throw std::invalid_argument("init_state: alpha must be >= 0");
  if (params.k < 1) throw std::invalid_argument("init_state: k must be >= 1");

  BanditState state;
  state.params = params;
  state.arms.reserve(initial_mu.size());
  for (std::size_t i = 0; i < initial_mu.size(); ++i) {
    if (!std::isfinite(initial_mu[i])) {
      throw std::invalid_argument("init_state: non-finite initial mu at arm " +
                                  std::to_string(i));
    }
    state.arms.push_back({i, initial_mu[i], 0});
  }
  return state;
}

std::vector<double> ucb_scores(const BanditState& state) {
  const double log_t = std::log(static_cast<double>(state.t));
  std::vector<double> scores;
  scores.reserve(state.arms.size());
  for (const auto& arm : state.arms) {
    scores.push_back(arm.mu + state.params.alpha *
                                  std::sqrt(2.0 * log_t /
                                            (static_cast<double>(arm.n) + state.params.epsilon)));
  }
  return scores;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, scores.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

void update(BanditState& state, std::span<const std::size_t> selected, double reward) {
  if (!std::isfinite(reward)) throw std::invalid_argument("update: non-finite reward");
  std::vector<bool> seen(state.arms.size(), false);
  for (std::size_t idx : selected) {
    if (idx >= state.arms.size()) {
      throw std::out_of_range("update: arm index " + std::to_string(idx) + " out of range");
    }
    if (seen[idx]) throw std::invalid_argument("update: arm selected twice");
    seen[idx] = true;
  }

  const auto t = static_cast<double>(state.t);
  for (std::size_t idx : selected) {
    auto& arm = state.arms[idx];
    arm.n += 1;
    if (state.params.mode == MuUpdateMode::verbatim_global_t) {
      arm.mu = (arm.mu * (t - 1.0) + reward) / t;
    } else {
      const auto n = static_cast<double>(arm.n);
      arm.mu = (arm.mu * (n - 1.0) + reward) / n;
    }
  }
  state.t += 1;
}

}  // namespace longmab
