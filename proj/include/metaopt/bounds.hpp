#pragma once

#include <cstdint>
#include <vector>

namespace metaopt {

// Inputs of the two-sample generalization bound: candidate-selection
// sample size n, final-evaluation sample size m, failure probability
// delta, and the optimal true risk when known (0 when unknown, making
// the bound cover the excess term only).
struct BoundQuery {
  long long n = 1;
  long long m = 1;
  double delta = 0.05;
  double r_star = 0.0;
};

struct BoundResult {
  double epsilon_n = 0.0;  // deviation at size n and confidence delta/3
  double epsilon_m = 0.0;  // deviation at size m and confidence delta/3
  double bound_rhs = 0.0;  // r_star + sqrt(2 log(6/δ)/n) + sqrt(log(6/δ)/(2m))
};

// sqrt(log(2/delta) / (2n)), natural log. Throws std::domain_error for
// n < 1 or delta outside (0,1).
double hoeffding_epsilon(long long n, double delta);

// The two-sample bound. bound_rhs is evaluated from its closed form;
// epsilon_n/epsilon_m come from hoeffding_epsilon at delta/3, so the
// identity bound_rhs - r_star == 2·epsilon_n + epsilon_m is a genuine
// cross-check of two independent evaluation routes.
BoundResult two_sample_bound(const BoundQuery& query);

// Finite candidate family with Bernoulli losses: member t fails on a
// uniform draw x in [0,1) exactly when x < risks[t], so its true risk is
// risks[t].
struct BernoulliLossModel {
  std::vector<double> risks;

  double loss(std::size_t theta, double x) const {
    return x < risks[theta] ? 1.0 : 0.0;
  }
  std::size_t size() const { return risks.size(); }
  double min_risk() const;
};

// Monte-Carlo check of the bound's probabilistic claim. Per trial:
// sample S1 (n draws) and S2 (m draws); pick the empirical-risk
// minimizer on S1; record whether its S2 risk stays below the bound with
// the true optimal risk plugged in. Returns the fraction of trials
// satisfying the bound (expected well above 1 - delta). Throws for
// trials < 1 or an empty model.
double empirical_bound_check(const BernoulliLossModel& model, long long n,
                             long long m, double delta, long long trials,
                             std::uint64_t rng_seed);

}  // namespace metaopt
