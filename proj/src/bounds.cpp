#include "metaopt/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "metaopt/seeding.hpp"

namespace metaopt {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::domain_error("delta must lie strictly between 0 and 1, got " +
                            std::to_string(delta));
  }
}

// Uniform double in [0, 1) from the high 53 bits of one engine draw.
// Avoids std::uniform_real_distribution, whose output is not pinned down
// across standard-library implementations.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

double hoeffding_epsilon(long long n, double delta) {
  if (n < 1) {
    throw std::domain_error("sample size must be at least 1, got " +
                            std::to_string(n));
  }
  check_delta(delta);
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

BoundResult two_sample_bound(const BoundQuery& query) {
  if (query.n < 1 || query.m < 1) {
    throw std::domain_error("sample sizes must be at least 1, got n=" +
                            std::to_string(query.n) + " m=" +
                            std::to_string(query.m));
  }
  check_delta(query.delta);
  BoundResult result;
  result.epsilon_n = hoeffding_epsilon(query.n, query.delta / 3.0);
  result.epsilon_m = hoeffding_epsilon(query.m, query.delta / 3.0);
  const double log_term = std::log(6.0 / query.delta);
  result.bound_rhs =
      query.r_star +
      std::sqrt(2.0 * log_term / static_cast<double>(query.n)) +
      std::sqrt(log_term / (2.0 * static_cast<double>(query.m)));
  return result;
}

double BernoulliLossModel::min_risk() const {
  if (risks.empty()) {
    throw std::domain_error("loss model has no candidates");
  }
  return *std::min_element(risks.begin(), risks.end());
}

double empirical_bound_check(const BernoulliLossModel& model, long long n,
                             long long m, double delta, long long trials,
                             std::uint64_t rng_seed) {
  if (model.size() == 0) {
    throw std::domain_error("loss model has no candidates");
  }
  if (trials < 1) {
    throw std::domain_error("trial count must be at least 1, got " +
                            std::to_string(trials));
  }
  const double r_star = model.min_risk();
  const double bound =
      two_sample_bound({n, m, delta, r_star}).bound_rhs;

  long long satisfied = 0;
  for (long long trial = 0; trial < trials; ++trial) {
    // One independent stream per trial, so the estimate does not depend
    // on how trials would be scheduled across threads.
    auto rng = seed_stream(rng_seed, "bound-trial#" + std::to_string(trial));

    // Selection sample: empirical risk of every candidate on shared draws.
    std::vector<double> empirical(model.size(), 0.0);
    for (long long i = 0; i < n; ++i) {
      const double x = uniform01(rng);
      for (std::size_t t = 0; t < model.size(); ++t) {
        empirical[t] += model.loss(t, x);
      }
    }
    std::size_t chosen = 0;
    for (std::size_t t = 1; t < model.size(); ++t) {
      if (empirical[t] < empirical[chosen]) chosen = t;
    }

    // Held-out sample: risk of the selected candidate.
    double heldout = 0.0;
    for (long long i = 0; i < m; ++i) {
      heldout += model.loss(chosen, uniform01(rng));
    }
    heldout /= static_cast<double>(m);

    if (heldout <= bound) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(trials);
}

}  // namespace metaopt
