#pragma once

#include "biaslens/embed_store.hpp"
#include "biaslens/meta.hpp"
#include "biaslens/weat.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace biaslens {

/// Chosen vector index for every stimulus of a spec.
using Draw = std::map<std::string, std::size_t, std::less<>>;

struct EffectSample {
    double effect_size = 0.0;
    double variance = 0.0;
    double p_value = 0.0;
    std::size_t sample_index = 0;
    Draw draw_record;
};

inline constexpr std::size_t kDefaultCeatSamples = 10'000;
inline constexpr std::size_t kDefaultSamplePermutations = 1'000;

struct CeatOptions {
    /// Worker threads used for scoring. Results do not depend on this value.
    std::size_t workers = 1;
    /// When set, draws for every stimulus are restricted to vectors whose
    /// sentence id is listed. Used to pin samples to sentences shared across banks.
    std::optional<std::set<std::string, std::less<>>> sentence_allow_list;
};

struct CeatResult {
    std::string spec_label;
    std::string model_id;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;
    std::vector<EffectSample> samples;
    MetaResult meta;
};

/// Scores one draw: WEAT effect size, in-sample variance and permutation p-value
/// over the selected contextualized vectors.
EffectSample sample_effect(const EmbeddingBank& bank, const WeatSpec& spec, const Draw& draw,
                           const PValueMode& p_mode);

/// Per-stimulus index sequences of length `samples`. A stimulus with at least
/// `samples` eligible vectors gets the first `samples` entries of a seeded
/// uniform permutation (no repeats); any other stimulus gets i.i.d. uniform
/// draws. Each stimulus has its own counter-based stream keyed by (seed, word).
std::map<std::string, std::vector<std::size_t>, std::less<>> plan_draws(
    const EmbeddingBank& bank, const WeatSpec& spec, std::size_t samples, std::uint64_t seed,
    const std::optional<std::set<std::string, std::less<>>>& sentence_allow_list = std::nullopt);

/// Default per-sample p-value mode: Monte Carlo with 1,000 permutations.
PValueMode default_sample_pvalue_mode(std::uint64_t seed);

/// Draws `samples` effect sizes and combines them with the random-effects model.
/// Deterministic in (bank, spec, samples, seed, p_mode); Monte Carlo p-value seeds
/// are re-derived per sample from the mode's seed and the sample index.
CeatResult run_ceat(const EmbeddingBank& bank, const WeatSpec& spec, std::size_t samples, std::uint64_t seed,
                    const PValueMode& p_mode, const CeatOptions& options = {});

inline CeatResult run_ceat(const EmbeddingBank& bank, const WeatSpec& spec, std::size_t samples,
                           std::uint64_t seed) {
    return run_ceat(bank, spec, samples, seed, default_sample_pvalue_mode(seed));
}

}  // namespace biaslens
