#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace biaslens {

/// One effect-size observation entering the random-effects model.
struct EffectObservation {
    double effect_size;
    double variance;
};

struct MetaResult {
    double ces = 0.0;
    double se = 0.0;
    double sigma2_between = 0.0;
    double q_statistic = 0.0;
    double c_value = 0.0;
    double p_combined = 1.0;
    std::vector<double> fixed_weights;  // W_i = 1 / V_i, input order
    std::vector<double> re_weights;     // v_i = 1 / (V_i + sigma2_between), input order
};

/// Random-effects combination of effect sizes with between-sample variance
/// estimated from the Q statistic (method of moments).
///
/// Reductions run over the observations in a canonical sorted order with
/// pairwise summation, so every output is independent of input order and of
/// how the observations were produced in parallel. A single observation has
/// c = 0; sigma2_between is then defined as 0.
MetaResult combine(std::span<const EffectObservation> observations);

/// Two-tailed p-value 2 * (1 - Phi(|ces / se|)), computed in complementary form.
double combined_pvalue(double ces, double se);

/// Standard normal CDF.
double normal_cdf(double x);

/// Pairwise (cascade) summation with a fixed association tree.
double pairwise_sum(std::span<const double> values);

}  // namespace biaslens
