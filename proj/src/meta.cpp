#include "biaslens/meta.hpp"

#include "biaslens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace biaslens {

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 8;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double combined_pvalue(double ces, double se) {
    if (!(se > 0.0) || !std::isfinite(se)) throw Error(ErrorCategory::parameter, "standard error must be positive");
    if (!std::isfinite(ces)) throw Error(ErrorCategory::parameter, "combined effect size must be finite");
    // 2 * (1 - Phi(|z|)) == erfc(|z| / sqrt 2)
    const double p = std::erfc(std::abs(ces / se) / std::sqrt(2.0));
    return std::clamp(p, 0.0, 1.0);
}

MetaResult combine(std::span<const EffectObservation> observations) {
    const std::size_t n = observations.size();
    if (n == 0) throw Error(ErrorCategory::parameter, "random-effects model needs at least one sample");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& o = observations[i];
        if (!(o.variance > 0.0) || !std::isfinite(o.variance))
            throw Error(ErrorCategory::validation, "sample " + std::to_string(i) + " has invalid variance " +
                                                       std::to_string(o.variance));
        if (!std::isfinite(o.effect_size))
            throw Error(ErrorCategory::validation, "sample " + std::to_string(i) + " has a non-finite effect size");
    }

    std::vector<EffectObservation> sorted(observations.begin(), observations.end());
    std::sort(sorted.begin(), sorted.end(), [](const EffectObservation& l, const EffectObservation& r) {
        return l.effect_size != r.effect_size ? l.effect_size < r.effect_size : l.variance < r.variance;
    });

    std::vector<double> terms(n);
    auto sum_of = [&](auto&& f) {
        for (std::size_t i = 0; i < n; ++i) terms[i] = f(sorted[i]);
        return pairwise_sum(terms);
    };

    const double sum_w = sum_of([](const auto& o) { return 1.0 / o.variance; });
    const double sum_w2 = sum_of([](const auto& o) { return 1.0 / (o.variance * o.variance); });
    const double sum_we = sum_of([](const auto& o) { return o.effect_size / o.variance; });
    const double fixed_mean = sum_we / sum_w;

    MetaResult r;
    r.c_value = sum_w - sum_w2 / sum_w;
    // Centered form of sum W ES^2 - (sum W ES)^2 / sum W.
    r.q_statistic = sum_of([&](const auto& o) {
        const double d = o.effect_size - fixed_mean;
        return d * d / o.variance;
    });
    const double df = static_cast<double>(n - 1);
    if (n > 1 && r.q_statistic >= df && r.c_value > 0.0) r.sigma2_between = (r.q_statistic - df) / r.c_value;

    const double tau2 = r.sigma2_between;
    const double sum_v = sum_of([&](const auto& o) { return 1.0 / (o.variance + tau2); });
    // Weighted mean taken as an offset from the smallest effect size, which keeps
    // the result exact when all effect sizes coincide.
    const double lo = sorted.front().effect_size;
    const double hi = sorted.back().effect_size;
    const double sum_vd = sum_of([&](const auto& o) { return (o.effect_size - lo) / (o.variance + tau2); });
    r.ces = std::clamp(lo + sum_vd / sum_v, lo, hi);
    r.se = std::sqrt(1.0 / sum_v);
    r.p_combined = combined_pvalue(r.ces, r.se);

    r.fixed_weights.reserve(n);
    r.re_weights.reserve(n);
    for (const auto& o : observations) {
        r.fixed_weights.push_back(1.0 / o.variance);
        r.re_weights.push_back(1.0 / (o.variance + tau2));
    }
    return r;
}

}  // namespace biaslens
