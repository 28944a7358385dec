#include "biaslens/weat.hpp"

#include "biaslens/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace biaslens {

namespace {

struct MeanStd {
    double mean;
    double std;
    bool degenerate;
};

// Sum in a canonical order: positives and negatives separately, each by
// increasing magnitude. The result depends only on the multiset of values and
// negating every value negates the sum exactly.
double canonical_sum(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto first_pos = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
    double neg = 0.0, pos = 0.0;
    for (auto it = first_pos; it != sorted.begin();) neg += *--it;
    for (auto it = first_pos; it != sorted.end(); ++it) pos += *it;
    return neg + pos;
}

double canonical_mean(std::span<const double> values) {
    return canonical_sum(values) / static_cast<double>(values.size());
}

// Population convention (divide by n). Values that are all equal, or whose
// spread is at rounding level, are flagged degenerate.
MeanStd population_stats(std::span<const double> values) {
    const double mean = canonical_mean(values);
    std::vector<double> sq;
    sq.reserve(values.size());
    double scale = 0.0;
    for (double v : values) {
        sq.push_back((v - mean) * (v - mean));
        scale = std::max(scale, std::abs(v));
    }
    const double sd = std::sqrt(canonical_mean(sq));
    const bool all_equal = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    const bool degenerate = all_equal || sd <= 8.0 * std::numeric_limits<double>::epsilon() * scale;
    return {mean, sd, degenerate};
}

double mean_cosine(Vector w, std::span<const Vector> set) {
    std::vector<double> c;
    c.reserve(set.size());
    for (Vector v : set) c.push_back(cosine(w, v));
    return canonical_mean(c);
}

void check_dims(Vector a, Vector b) {
    if (a.size() != b.size())
        throw Error(ErrorCategory::parameter, "cosine of vectors with dimensions " + std::to_string(a.size()) +
                                                  " and " + std::to_string(b.size()));
}

}  // namespace

void validate(const WeatSpec& spec) {
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCategory::validation, (spec.label.empty() ? "" : spec.label + ": ") + msg);
    };
    auto check_unique = [&](const std::vector<std::string>& set, const char* name) {
        if (set.empty()) fail(std::string(name) + " is empty");
        std::set<std::string_view> seen;
        for (const auto& w : set) {
            if (w.empty()) fail(std::string(name) + " contains an empty word");
            if (!seen.insert(w).second) fail(std::string(name) + " repeats \"" + w + "\"");
        }
    };
    check_unique(spec.x, "X");
    check_unique(spec.y, "Y");
    check_unique(spec.a, "A");
    check_unique(spec.b, "B");
    if (spec.x.size() != spec.y.size())
        fail("|X| = " + std::to_string(spec.x.size()) + " differs from |Y| = " + std::to_string(spec.y.size()));
    if (spec.a.size() != spec.b.size())
        fail("|A| = " + std::to_string(spec.a.size()) + " differs from |B| = " + std::to_string(spec.b.size()));
    for (const auto& w : spec.x)
        if (std::find(spec.y.begin(), spec.y.end(), w) != spec.y.end()) fail("\"" + w + "\" is in both X and Y");
}

std::vector<std::string> stimuli(const WeatSpec& spec) {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const auto* set : {&spec.x, &spec.y, &spec.a, &spec.b})
        for (const auto& w : *set)
            if (seen.insert(w).second) out.push_back(w);
    return out;
}

PrunedSpec prune_and_balance(const WeatSpec& spec, const std::function<bool(const std::string&)>& available,
                             std::uint64_t seed) {
    PrunedSpec out{spec, {}, {}};
    for (auto* set : {&out.spec.x, &out.spec.y, &out.spec.a, &out.spec.b}) {
        std::vector<std::string> kept;
        for (auto& w : *set) (available(w) ? kept : out.missing).push_back(w);
        *set = std::move(kept);
    }
    auto balance = [&](std::vector<std::string>& p, std::vector<std::string>& q, std::string_view tag) {
        auto& larger = p.size() > q.size() ? p : q;
        const std::size_t target = std::min(p.size(), q.size());
        if (larger.size() == target) return;
        std::vector<std::size_t> order(larger.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng rng(stream_key(seed, tag, 0));
        for (std::size_t i = 0; i < target; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
        std::vector<char> keep(larger.size(), 0);
        for (std::size_t i = 0; i < target; ++i) keep[order[i]] = 1;
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < larger.size(); ++i) (keep[i] ? kept : out.balanced_out).push_back(larger[i]);
        larger = std::move(kept);
    };
    balance(out.spec.x, out.spec.y, "balance-targets");
    balance(out.spec.a, out.spec.b, "balance-attributes");
    return out;
}

double cosine(Vector a, Vector b) {
    check_dims(a, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCategory::degenerate, "cosine of a zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double diff_assoc(Vector w, std::span<const Vector> a, std::span<const Vector> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCategory::parameter, "attribute sets must be non-empty");
    return mean_cosine(w, a) - mean_cosine(w, b);
}

double std_assoc(Vector w, std::span<const Vector> a, std::span<const Vector> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCategory::parameter, "attribute sets must be non-empty");
    std::vector<double> cos_all;
    cos_all.reserve(a.size() + b.size());
    for (Vector v : a) cos_all.push_back(cosine(w, v));
    for (Vector v : b) cos_all.push_back(cosine(w, v));
    const auto split = cos_all.begin() + static_cast<std::ptrdiff_t>(a.size());
    const double mean_a = canonical_mean(std::span<const double>(cos_all.begin(), split));
    const double mean_b = canonical_mean(std::span<const double>(split, cos_all.end()));
    const MeanStd all = population_stats(cos_all);
    if (all.degenerate)
        throw Error(ErrorCategory::degenerate, "association score undefined: cosines over A ∪ B have zero spread");
    return (mean_a - mean_b) / all.std;
}

ResolvedSpec resolve(const WeatSpec& spec, const EmbeddingTable& table) {
    std::vector<std::string> missing;
    for (const auto& w : stimuli(spec))
        if (!table.contains(w)) missing.push_back(w);
    if (!missing.empty()) throw MissingWordError(std::move(missing));
    return {lookup_all(spec.x, table), lookup_all(spec.y, table), lookup_all(spec.a, table),
            lookup_all(spec.b, table)};
}

std::vector<double> target_associations(const ResolvedSpec& spec) {
    std::vector<double> s;
    s.reserve(spec.x.size() + spec.y.size());
    for (Vector w : spec.x) s.push_back(diff_assoc(w, spec.a, spec.b));
    for (Vector w : spec.y) s.push_back(diff_assoc(w, spec.a, spec.b));
    return s;
}

double test_statistic(std::span<const double> associations, std::size_t nx) {
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < nx; ++i) sum_x += associations[i];
    for (std::size_t i = nx; i < associations.size(); ++i) sum_y += associations[i];
    return sum_x - sum_y;
}

EffectStats effect_stats(std::span<const double> associations, std::size_t nx) {
    if (nx == 0 || nx >= associations.size())
        throw Error(ErrorCategory::parameter, "both target sets must be non-empty");
    const auto x = associations.first(nx);
    const auto y = associations.subspan(nx);
    const double mean_x = canonical_mean(x);
    const double mean_y = canonical_mean(y);
    const MeanStd all = population_stats(associations);
    if (all.degenerate)
        throw Error(ErrorCategory::degenerate, "effect size undefined: s(w,A,B) is constant over X ∪ Y");
    return {(mean_x - mean_y) / all.std, all.std * all.std};
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i is always an integer; guard the multiply.
        const std::uint64_t factor = n - k + i;
        const std::uint64_t g = std::gcd(result, i);
        const std::uint64_t r = result / g;
        const std::uint64_t f = factor / (i / g);
        if (r != 0 && f > std::numeric_limits<std::uint64_t>::max() / r) return std::numeric_limits<std::uint64_t>::max();
        result = r * f;
    }
    return result;
}

namespace {

double partition_statistic(std::span<const double> s, const std::vector<char>& in_x) {
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) (in_x[i] ? sum_x : sum_y) += s[i];
    return sum_x - sum_y;
}

PermutationResult exact_pvalue(std::span<const double> s, std::size_t nx, double observed) {
    const std::size_t n = s.size();
    std::vector<char> in_x(n, 0);
    std::fill(in_x.begin(), in_x.begin() + static_cast<std::ptrdiff_t>(nx), 1);
    std::uint64_t total = 0, exceed = 0;
    // Lexicographically descending over masks starting at the identity partition.
    do {
        ++total;
        if (partition_statistic(s, in_x) > observed) ++exceed;
    } while (std::prev_permutation(in_x.begin(), in_x.end()));
    return {static_cast<double>(exceed) / static_cast<double>(total), PermutationKind::exact, total};
}

PermutationResult monte_carlo_pvalue(std::span<const double> s, std::size_t nx, double observed,
                                     const MonteCarloPermutation& mc) {
    if (mc.count == 0) throw Error(ErrorCategory::parameter, "Monte Carlo permutation count must be positive");
    const std::size_t n = s.size();
    CounterRng rng(stream_key(mc.seed, "permutation", 0));
    std::vector<std::size_t> order(n);
    std::vector<char> in_x(n);
    std::uint64_t exceed = 0;
    for (std::size_t draw = 0; draw < mc.count; ++draw) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::fill(in_x.begin(), in_x.end(), 0);
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(order[i], order[j]);
            in_x[order[i]] = 1;
        }
        if (partition_statistic(s, in_x) > observed) ++exceed;
    }
    return {static_cast<double>(exceed) / static_cast<double>(mc.count), PermutationKind::monte_carlo, mc.count};
}

}  // namespace

PermutationResult permutation_pvalue(std::span<const double> associations, std::size_t nx, const PValueMode& mode) {
    if (nx == 0 || nx >= associations.size())
        throw Error(ErrorCategory::parameter, "both target sets must be non-empty");
    const double observed = test_statistic(associations, nx);
    const std::uint64_t partitions = binomial(associations.size(), nx);
    return std::visit(
        [&](const auto& m) -> PermutationResult {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ExactPermutation>) {
                if (partitions > kExactPermutationBudget)
                    throw Error(ErrorCategory::budget,
                                "exact permutation test needs " +
                                    (partitions == std::numeric_limits<std::uint64_t>::max()
                                         ? std::string("more than 2^64")
                                         : std::to_string(partitions)) +
                                    " partitions, over the budget of " + std::to_string(kExactPermutationBudget) +
                                    "; use Monte Carlo mode");
                return exact_pvalue(associations, nx, observed);
            } else if constexpr (std::is_same_v<M, MonteCarloPermutation>) {
                return monte_carlo_pvalue(associations, nx, observed, m);
            } else {
                if (partitions <= kExactPermutationBudget) return exact_pvalue(associations, nx, observed);
                return monte_carlo_pvalue(associations, nx, observed, {kDefaultMonteCarloCount, m.seed});
            }
        },
        mode);
}

WeatOutcome weat(const ResolvedSpec& spec, const PValueMode& mode) {
    const auto s = target_associations(spec);
    const std::size_t nx = spec.x.size();
    const EffectStats es = effect_stats(s, nx);
    const PermutationResult p = permutation_pvalue(s, nx, mode);
    return {es.effect_size, p.p_value, test_statistic(s, nx), es.variance, p.kind, p.count};
}

std::vector<Vector> lookup_all(std::span<const std::string> words, const EmbeddingTable& table) {
    std::vector<std::string> missing;
    std::vector<Vector> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        if (table.contains(w))
            out.push_back(table.lookup(w));
        else
            missing.push_back(w);
    }
    if (!missing.empty()) throw MissingWordError(std::move(missing));
    return out;
}

double diff_assoc(std::string_view word, std::span<const std::string> a, std::span<const std::string> b,
                  const EmbeddingTable& table) {
    const std::string w(word);
    std::vector<std::string> all{w};
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    lookup_all(all, table);
    const auto va = lookup_all(a, table), vb = lookup_all(b, table);
    return diff_assoc(table.lookup(w), va, vb);
}

double std_assoc(std::string_view word, std::span<const std::string> a, std::span<const std::string> b,
                 const EmbeddingTable& table) {
    const std::string w(word);
    std::vector<std::string> all{w};
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    lookup_all(all, table);
    const auto va = lookup_all(a, table), vb = lookup_all(b, table);
    return std_assoc(table.lookup(w), va, vb);
}

double test_statistic(const WeatSpec& spec, const EmbeddingTable& table) {
    const ResolvedSpec r = resolve(spec, table);
    return test_statistic(target_associations(r), r.x.size());
}

double effect_size(const WeatSpec& spec, const EmbeddingTable& table) {
    const ResolvedSpec r = resolve(spec, table);
    return effect_stats(target_associations(r), r.x.size()).effect_size;
}

PermutationResult permutation_pvalue(const WeatSpec& spec, const EmbeddingTable& table, const PValueMode& mode) {
    const ResolvedSpec r = resolve(spec, table);
    return permutation_pvalue(target_associations(r), r.x.size(), mode);
}

WeatOutcome weat(const WeatSpec& spec, const EmbeddingTable& table, const PValueMode& mode) {
    return weat(resolve(spec, table), mode);
}

}  // namespace biaslens
