#include "aed/rl/trainer.hpp"

#include <cstdio>

namespace aed {

std::string metrics_header() {
  return "iteration\tsteps\tmean_episode_reward\tepisodes\tpolicy_loss\tvalue_loss\tentropy\tclip_fraction\t"
         "approx_kl\tpathwise_loss\tlearning_rate\tminibatches\taborted";
}

std::string metrics_row(const IterationMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.9g\t%zu\t%.9g\t%.9g\t%.9g\t%.6f\t%.9g\t%.9g\t%.6g\t%zu\t%d", m.iteration,
                m.steps, m.mean_episode_reward, m.episodes, m.ppo.policy_loss, m.ppo.value_loss, m.ppo.entropy,
                m.ppo.clip_fraction, m.ppo.approx_kl, m.ppo.pathwise_loss, m.learning_rate,
                m.ppo.minibatches, m.ppo.aborted ? 1 : 0);
  return buf;
}

}  // namespace aed
