#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace longmab {

enum class MuUpdateMode {
  /// mu <- ((t-1)*mu + r) / t with t the global rollout step.
  verbatim_global_t,
  /// mu <- ((n-1)*mu + r) / n with n the arm's updated selection count.
  per_arm_mean,
};

std::string_view to_string(MuUpdateMode mode);
MuUpdateMode parse_mu_update_mode(std::string_view name);

struct BanditParams {
  double alpha = 1.0;
  double epsilon = 1e-6;
  std::size_t k = 4;
  MuUpdateMode mode = MuUpdateMode::verbatim_global_t;
};

struct ArmStats {
  std::size_t index = 0;
  double mu = 0.0;
  std::int64_t n = 0;
};

/// Arm statistics for one question. `t` is the step about to be played.
struct BanditState {
  std::vector<ArmStats> arms;
  std::int64_t t = 1;
  BanditParams params;

  std::vector<double> mu() const;
  std::vector<std::int64_t> counts() const;
};

BanditState init_state(std::span<const double> initial_mu, const BanditParams& params);

/// mu_i + alpha * sqrt(2 ln t / (n_i + epsilon)) for every arm.
std::vector<double> ucb_scores(const BanditState& state);

/// The min(k, n) best-scoring arms, ties to the lower index, returned in
/// ascending index order.
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k);

/// Credits `reward` to every selected arm and advances t.
void update(BanditState& state, std::span<const std::size_t> selected, double reward);

}  // namespace longmab
