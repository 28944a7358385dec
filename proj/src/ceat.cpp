#include "biaslens/ceat.hpp"

#include "biaslens/error.hpp"
#include "biaslens/rng.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <thread>

namespace biaslens {

namespace {

void require_stimuli(const EmbeddingBank& bank, const WeatSpec& spec) {
    std::vector<std::string> missing;
    for (const auto& w : stimuli(spec))
        if (!bank.contains(w)) missing.push_back(w);
    if (!missing.empty()) throw MissingWordError(std::move(missing));
}

std::vector<Vector> pick(const EmbeddingBank& bank, const std::vector<std::string>& words, const Draw& draw) {
    std::vector<Vector> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        auto it = draw.find(w);
        if (it == draw.end()) throw Error(ErrorCategory::parameter, "draw has no index for stimulus \"" + w + "\"");
        out.push_back(bank.vector(w, it->second));
    }
    return out;
}

PValueMode reseed(const PValueMode& mode, std::size_t sample_index) {
    return std::visit(
        [&](const auto& m) -> PValueMode {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, ExactPermutation>) {
                return m;
            } else {
                M copy = m;
                copy.seed = stream_key(m.seed, "sample-pvalue", sample_index);
                return copy;
            }
        },
        mode);
}

}  // namespace

EffectSample sample_effect(const EmbeddingBank& bank, const WeatSpec& spec, const Draw& draw,
                           const PValueMode& p_mode) {
    require_stimuli(bank, spec);
    const ResolvedSpec resolved{pick(bank, spec.x, draw), pick(bank, spec.y, draw), pick(bank, spec.a, draw),
                                pick(bank, spec.b, draw)};
    const WeatOutcome outcome = weat(resolved, p_mode);
    EffectSample sample;
    sample.effect_size = outcome.effect_size;
    sample.variance = outcome.variance;
    sample.p_value = outcome.p_value;
    for (const auto& w : stimuli(spec)) sample.draw_record.emplace(w, draw.find(w)->second);
    return sample;
}

std::map<std::string, std::vector<std::size_t>, std::less<>> plan_draws(
    const EmbeddingBank& bank, const WeatSpec& spec, std::size_t samples, std::uint64_t seed,
    const std::optional<std::set<std::string, std::less<>>>& sentence_allow_list) {
    if (samples < 1) throw Error(ErrorCategory::parameter, "sample count must be at least 1");
    require_stimuli(bank, spec);

    std::map<std::string, std::vector<std::size_t>, std::less<>> plan;
    for (const auto& word : stimuli(spec)) {
        const BankEntry& entry = bank.entry(word);
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < entry.count(); ++i)
            if (!sentence_allow_list || sentence_allow_list->contains(entry.sentence_ids[i])) eligible.push_back(i);
        if (eligible.empty())
            throw Error(ErrorCategory::validation, "no allowed sentence for stimulus \"" + word + "\"");

        CounterRng rng(stream_key(seed, "ceat-draw", word));
        std::vector<std::size_t> picks(samples);
        if (eligible.size() >= samples) {
            for (std::size_t i = 0; i < samples; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
                std::swap(eligible[i], eligible[j]);
                picks[i] = eligible[i];
            }
        } else {
            for (auto& p : picks) p = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
        }
        plan.emplace(word, std::move(picks));
    }
    return plan;
}

PValueMode default_sample_pvalue_mode(std::uint64_t seed) {
    return MonteCarloPermutation{kDefaultSamplePermutations, seed};
}

CeatResult run_ceat(const EmbeddingBank& bank, const WeatSpec& spec, std::size_t samples, std::uint64_t seed,
                    const PValueMode& p_mode, const CeatOptions& options) {
    validate(spec);
    const auto plan = plan_draws(bank, spec, samples, seed, options.sentence_allow_list);

    CeatResult result;
    result.spec_label = spec.label;
    result.model_id = bank.model_id();
    result.seed = seed;
    result.sample_count = samples;
    result.samples.resize(samples);

    auto score = [&](std::size_t i) {
        Draw draw;
        for (const auto& [word, picks] : plan) draw.emplace(word, picks[i]);
        EffectSample s = sample_effect(bank, spec, draw, reseed(p_mode, i));
        s.sample_index = i;
        result.samples[i] = std::move(s);
    };

    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, samples);
    if (workers == 1) {
        for (std::size_t i = 0; i < samples; ++i) score(i);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t i = w; i < samples; i += workers) score(i);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<EffectObservation> observations;
    observations.reserve(samples);
    for (const auto& s : result.samples) observations.push_back({s.effect_size, s.variance});
    result.meta = combine(observations);
    return result;
}

}  // namespace biaslens
