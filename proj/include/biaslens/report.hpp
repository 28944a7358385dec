#pragma once

#include "biaslens/ceat.hpp"
#include "biaslens/detect.hpp"
#include "biaslens/weat.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace biaslens {

inline constexpr std::size_t kDefaultHistogramBins = 50;

/// Effect-size distribution with the mean sample p-value of every bin.
struct HistogramReport {
    std::string label;
    std::vector<double> bin_edges;               // bin_count + 1 ascending edges
    std::vector<std::size_t> counts;             // per bin
    std::vector<std::optional<double>> mean_p;   // empty bins have no mean
};

/// Uniform bins over [min ES, max ES]; bins are right-open except the last.
/// When every ES is equal the result is one bin holding all samples.
HistogramReport histogram(std::span<const EffectSample> samples, std::size_t bin_count, std::string label = {});

enum class Format { csv, json, svg };
Format parse_format(std::string_view name);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);
/// Human-readable p-value: values below 1e-30 print as "<1e-30".
std::string format_p_human(double p);

struct RenderOptions {
    std::size_t bins = kDefaultHistogramBins;
    /// Omit per-sample draw records from CEAT JSON.
    bool compact = false;
};

nlohmann::ordered_json to_json(const WeatOutcome& outcome, std::string_view label);
nlohmann::ordered_json to_json(const MetaResult& meta);
nlohmann::ordered_json to_json(const CeatResult& result, const RenderOptions& options = {});
nlohmann::ordered_json to_json(const HistogramReport& hist);
nlohmann::ordered_json to_json(const ThresholdChoice& choice);
nlohmann::ordered_json to_json(const DetectionResult& result);

// All renderers are pure: the same value always yields the same bytes.
//
// CSV schemas:
//   CEAT summary   label,ces,se,p_combined,n,sigma2_between
//   histogram      bin_lo,bin_hi,count,mean_p
//   ROC            threshold,tpr,fpr            (ascending threshold)
//   detection      word,pair,score,detected
//   WEAT           label,effect_size,p_value,test_statistic,p_mode,p_count
std::string render(const CeatResult& result, Format format, const RenderOptions& options = {});
std::string render(const HistogramReport& hist, Format format);
std::string render(const ThresholdChoice& choice, Format format);
std::string render(const DetectionResult& result, Format format);
std::string render(const WeatOutcome& outcome, std::string_view label, Format format);

}  // namespace biaslens
