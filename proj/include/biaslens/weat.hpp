#pragma once

#include "biaslens/embed_store.hpp"
#include "biaslens/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace biaslens {

/// Two target sets and two attribute sets defining one association test.
struct WeatSpec {
    std::string label;
    std::vector<std::string> x;
    std::vector<std::string> y;
    std::vector<std::string> a;
    std::vector<std::string> b;

    friend bool operator==(const WeatSpec&, const WeatSpec&) = default;
};

/// Throws Error(validation) naming the offending set when |X| != |Y|, |A| != |B|,
/// a set is empty, a set repeats a word, or X and Y intersect.
void validate(const WeatSpec& spec);

/// Every distinct word of the spec, in X, Y, A, B order.
std::vector<std::string> stimuli(const WeatSpec& spec);

struct PrunedSpec {
    WeatSpec spec;
    std::vector<std::string> missing;       // removed because unavailable
    std::vector<std::string> balanced_out;  // removed to equalize set sizes
};

/// Removes unavailable words, then equalizes |X|,|Y| and |A|,|B| by dropping a
/// seeded uniform random subset of the larger set. Order of survivors is kept.
PrunedSpec prune_and_balance(const WeatSpec& spec, const std::function<bool(const std::string&)>& available,
                             std::uint64_t seed);

inline constexpr std::uint64_t kExactPermutationBudget = 200'000;
inline constexpr std::size_t kDefaultMonteCarloCount = 10'000;

struct ExactPermutation {};
struct MonteCarloPermutation {
    std::size_t count = kDefaultMonteCarloCount;
    std::uint64_t seed = kDefaultSeed;
};
/// Exact enumeration when the partition count fits the budget, Monte Carlo otherwise.
struct AutoPermutation {
    std::uint64_t seed = kDefaultSeed;
};
using PValueMode = std::variant<ExactPermutation, MonteCarloPermutation, AutoPermutation>;

enum class PermutationKind { exact, monte_carlo };

struct WeatOutcome {
    double effect_size = 0.0;
    double p_value = 0.0;
    double test_statistic = 0.0;
    /// Square of the population std-dev of s(w,A,B) over X ∪ Y.
    double variance = 0.0;
    PermutationKind p_kind = PermutationKind::exact;
    /// Partitions evaluated: all of them (exact) or the sampled count.
    std::uint64_t p_count = 0;
};

// ---------------------------------------------------------------------------
// Vector-level kernel. Everything below the table-level API is computed here.

double cosine(Vector a, Vector b);

/// mean cos(w, A) - mean cos(w, B)
double diff_assoc(Vector w, std::span<const Vector> a, std::span<const Vector> b);

/// diff_assoc divided by the population std-dev of cos(w, ·) over A ∪ B.
double std_assoc(Vector w, std::span<const Vector> a, std::span<const Vector> b);

struct ResolvedSpec {
    std::vector<Vector> x;
    std::vector<Vector> y;
    std::vector<Vector> a;
    std::vector<Vector> b;
};

/// Looks every word up; reports all missing words in one MissingWordError.
ResolvedSpec resolve(const WeatSpec& spec, const EmbeddingTable& table);

/// s(w,A,B) for every target, X first then Y.
std::vector<double> target_associations(const ResolvedSpec& spec);

/// Effect-size building blocks over precomputed associations (first `nx` are X).
struct EffectStats {
    double effect_size;
    double variance;
};
double test_statistic(std::span<const double> associations, std::size_t nx);
EffectStats effect_stats(std::span<const double> associations, std::size_t nx);

struct PermutationResult {
    double p_value;
    PermutationKind kind;
    std::uint64_t count;
};
/// One-sided fraction of equal-size partitions whose statistic strictly exceeds
/// the observed one.
PermutationResult permutation_pvalue(std::span<const double> associations, std::size_t nx, const PValueMode& mode);

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

WeatOutcome weat(const ResolvedSpec& spec, const PValueMode& mode);

// ---------------------------------------------------------------------------
// Table-level API.

double diff_assoc(std::string_view word, std::span<const std::string> a, std::span<const std::string> b,
                  const EmbeddingTable& table);
double std_assoc(std::string_view word, std::span<const std::string> a, std::span<const std::string> b,
                 const EmbeddingTable& table);
double test_statistic(const WeatSpec& spec, const EmbeddingTable& table);
double effect_size(const WeatSpec& spec, const EmbeddingTable& table);
PermutationResult permutation_pvalue(const WeatSpec& spec, const EmbeddingTable& table, const PValueMode& mode);
WeatOutcome weat(const WeatSpec& spec, const EmbeddingTable& table, const PValueMode& mode);

/// Looks up every word in `words`; throws one MissingWordError listing all absent ones.
std::vector<Vector> lookup_all(std::span<const std::string> words, const EmbeddingTable& table);

}  // namespace biaslens
