#include "biaslens/report.hpp"

#include "biaslens/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace biaslens {

using nlohmann::ordered_json;

HistogramReport histogram(std::span<const EffectSample> samples, std::size_t bin_count, std::string label) {
    if (samples.empty()) throw Error(ErrorCategory::parameter, "histogram needs at least one sample");
    if (bin_count < 1) throw Error(ErrorCategory::parameter, "bin count must be positive");

    auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
        return a.effect_size < b.effect_size;
    });
    const double lo = lo_it->effect_size;
    const double hi = hi_it->effect_size;

    HistogramReport h;
    h.label = std::move(label);
    const std::size_t bins = lo == hi ? 1 : bin_count;
    h.bin_edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k)
        h.bin_edges[k] = k == bins ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    h.counts.assign(bins, 0);

    std::vector<double> p_sum(bins, 0.0);
    const auto inner_begin = h.bin_edges.begin() + 1;
    const auto inner_end = h.bin_edges.end() - 1;
    for (const auto& s : samples) {
        // Number of interior edges <= ES is the bin index.
        const auto bin = static_cast<std::size_t>(std::upper_bound(inner_begin, inner_end, s.effect_size) - inner_begin);
        ++h.counts[bin];
        p_sum[bin] += s.p_value;
    }
    h.mean_p.resize(bins);
    for (std::size_t k = 0; k < bins; ++k)
        if (h.counts[k]) h.mean_p[k] = p_sum[k] / static_cast<double>(h.counts[k]);
    return h;
}

Format parse_format(std::string_view name) {
    if (name == "csv") return Format::csv;
    if (name == "json") return Format::json;
    if (name == "svg") return Format::svg;
    throw Error(ErrorCategory::parameter, "unknown output format \"" + std::string(name) + "\"");
}

std::string format_number(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::string format_p_human(double p) { return p < 1e-30 ? std::string("<1e-30") : format_number(p); }

namespace {

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fixed(double v, int digits = 2) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

const char* kind_name(PermutationKind k) { return k == PermutationKind::exact ? "exact" : "monte-carlo"; }

constexpr double kWidth = 640, kHeight = 400, kMargin = 48;

std::string svg_open(std::string_view title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";
    s += "<line x1=\"48\" y1=\"352\" x2=\"592\" y2=\"352\" stroke=\"black\"/>\n";
    s += "<line x1=\"48\" y1=\"48\" x2=\"48\" y2=\"352\" stroke=\"black\"/>\n";
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON

ordered_json to_json(const WeatOutcome& o, std::string_view label) {
    return {{"label", label},
            {"effect_size", o.effect_size},
            {"p_value", o.p_value},
            {"test_statistic", o.test_statistic},
            {"variance", o.variance},
            {"p_mode", kind_name(o.p_kind)},
            {"p_count", o.p_count}};
}

ordered_json to_json(const MetaResult& m) {
    return {{"ces", m.ces},
            {"se", m.se},
            {"p_combined", m.p_combined},
            {"sigma2_between", m.sigma2_between},
            {"q_statistic", m.q_statistic},
            {"c_value", m.c_value}};
}

ordered_json to_json(const HistogramReport& h) {
    ordered_json mean_p = ordered_json::array();
    for (const auto& m : h.mean_p) mean_p.push_back(m ? ordered_json(*m) : ordered_json(nullptr));
    return {{"label", h.label}, {"bin_edges", h.bin_edges}, {"counts", h.counts}, {"mean_p", std::move(mean_p)}};
}

ordered_json to_json(const CeatResult& r, const RenderOptions& options) {
    ordered_json samples = ordered_json::array();
    for (const auto& s : r.samples) {
        ordered_json j = {{"index", s.sample_index}, {"es", s.effect_size}, {"v", s.variance}, {"p", s.p_value}};
        if (!options.compact) {
            ordered_json draw = ordered_json::object();
            for (const auto& [w, idx] : s.draw_record) draw[w] = idx;
            j["draw_record"] = std::move(draw);
        }
        samples.push_back(std::move(j));
    }
    ordered_json out = {{"label", r.spec_label},
                        {"model_id", r.model_id},
                        {"seed", r.seed},
                        {"n", r.sample_count},
                        {"meta", to_json(r.meta)}};
    if (!r.samples.empty()) out["histogram"] = to_json(histogram(r.samples, options.bins, r.spec_label));
    out["samples"] = std::move(samples);
    return out;
}

ordered_json to_json(const ThresholdChoice& c) {
    ordered_json points = ordered_json::array();
    for (const auto& p : c.roc_points) points.push_back({{"threshold", p.threshold}, {"tpr", p.tpr}, {"fpr", p.fpr}});
    return {{"threshold", c.threshold}, {"tpr", c.tpr}, {"fpr", c.fpr}, {"tp", c.tp}, {"roc_points", points}};
}

ordered_json to_json(const DetectionResult& r) {
    ordered_json scores = ordered_json::object();
    for (const auto& [word, pairs] : r.per_word_scores) {
        ordered_json row = ordered_json::object();
        for (const auto& p : pairs) row[p.pair_id] = p.score;
        scores[word] = std::move(row);
    }
    ordered_json out = {{"target_cell", r.target_cell},
                        {"threshold", r.threshold_used},
                        {"detected", r.detected},
                        {"scores", std::move(scores)}};
    if (r.confusion) {
        const Confusion& c = *r.confusion;
        out["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"accuracy", c.accuracy}};
    } else {
        out["confusion"] = nullptr;
    }
    out["roc"] = r.roc ? to_json(*r.roc) : ordered_json(nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// Renderers

std::string render(const HistogramReport& h, Format format) {
    switch (format) {
        case Format::json: return to_json(h).dump(2) + "\n";
        case Format::csv: {
            std::string out = "bin_lo,bin_hi,count,mean_p\n";
            for (std::size_t k = 0; k < h.counts.size(); ++k)
                out += format_number(h.bin_edges[k]) + "," + format_number(h.bin_edges[k + 1]) + "," +
                       std::to_string(h.counts[k]) + "," + (h.mean_p[k] ? format_number(*h.mean_p[k]) : "") + "\n";
            return out;
        }
        case Format::svg: {
            std::string s = svg_open(h.label.empty() ? "effect size distribution" : h.label + " effect sizes");
            const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
            const double plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
            const double bar_w = plot_w / static_cast<double>(h.counts.size());
            for (std::size_t k = 0; k < h.counts.size(); ++k) {
                const double bh = plot_h * static_cast<double>(h.counts[k]) / static_cast<double>(peak);
                // Shade encodes the bin's mean p-value: darker is smaller.
                const int shade = h.mean_p[k] ? static_cast<int>(std::lround(200.0 * *h.mean_p[k])) : 220;
                s += "<rect x=\"" + fixed(kMargin + bar_w * static_cast<double>(k)) + "\" y=\"" +
                     fixed(kHeight - kMargin - bh) + "\" width=\"" + fixed(bar_w) + "\" height=\"" + fixed(bh) +
                     "\" fill=\"rgb(" + std::to_string(shade) + "," + std::to_string(shade) + ",255)\" stroke=\"none\"/>\n";
            }
            s += "<text x=\"48\" y=\"372\" font-family=\"sans-serif\" font-size=\"11\">" +
                 xml_escape(fixed(h.bin_edges.front(), 3)) + "</text>\n";
            s += "<text x=\"592\" y=\"372\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
                 xml_escape(fixed(h.bin_edges.back(), 3)) + "</text>\n";
            s += "<text x=\"44\" y=\"56\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
                 std::to_string(peak) + "</text>\n";
            return s + "</svg>\n";
        }
    }
    throw Error(ErrorCategory::parameter, "unknown output format");
}

std::string render(const CeatResult& r, Format format, const RenderOptions& options) {
    switch (format) {
        case Format::json: return to_json(r, options).dump(2) + "\n";
        case Format::csv:
            return "label,ces,se,p_combined,n,sigma2_between\n" + csv_field(r.spec_label) + "," +
                   format_number(r.meta.ces) + "," + format_number(r.meta.se) + "," +
                   format_number(r.meta.p_combined) + "," + std::to_string(r.sample_count) + "," +
                   format_number(r.meta.sigma2_between) + "\n";
        case Format::svg: {
            if (r.samples.empty()) throw Error(ErrorCategory::parameter, "no samples to plot");
            HistogramReport h = histogram(r.samples, options.bins, r.spec_label);
            h.label = r.spec_label + " (CES " + fixed(r.meta.ces, 2) + ", p " + format_p_human(r.meta.p_combined) + ")";
            return render(h, Format::svg);
        }
    }
    throw Error(ErrorCategory::parameter, "unknown output format");
}

std::string render(const ThresholdChoice& c, Format format) {
    switch (format) {
        case Format::json: return to_json(c).dump(2) + "\n";
        case Format::csv: {
            std::string out = "threshold,tpr,fpr\n";
            for (const auto& p : c.roc_points)
                out += format_number(p.threshold) + "," + format_number(p.tpr) + "," + format_number(p.fpr) + "\n";
            return out;
        }
        case Format::svg: {
            std::string s = svg_open("ROC (threshold " + fixed(c.threshold, 3) + ")");
            const double plot = kHeight - 2 * kMargin;
            auto px = [&](double fpr) { return fixed(kMargin + plot * fpr); };
            auto py = [&](double tpr) { return fixed(kHeight - kMargin - plot * tpr); };
            // Points ordered by descending threshold trace the curve from (0,0) to (1,1).
            std::string path = "M" + px(0) + "," + py(0);
            for (auto it = c.roc_points.rbegin(); it != c.roc_points.rend(); ++it)
                path += " L" + px(it->fpr) + "," + py(it->tpr);
            path += " L" + px(1) + "," + py(1);
            s += "<path d=\"" + path + "\" fill=\"none\" stroke=\"navy\" stroke-width=\"2\"/>\n";
            s += "<line x1=\"" + px(0) + "\" y1=\"" + py(0) + "\" x2=\"" + px(1) + "\" y2=\"" + py(1) +
                 "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
            s += "<circle cx=\"" + px(c.fpr) + "\" cy=\"" + py(c.tpr) + "\" r=\"5\" fill=\"crimson\"/>\n";
            s += "<text x=\"" + px(0.5) + "\" y=\"380\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                 "font-size=\"11\">false positive rate</text>\n";
            s += "<text x=\"20\" y=\"200\" font-family=\"sans-serif\" font-size=\"11\" "
                 "transform=\"rotate(-90 20 200)\">true positive rate</text>\n";
            return s + "</svg>\n";
        }
    }
    throw Error(ErrorCategory::parameter, "unknown output format");
}

std::string render(const DetectionResult& r, Format format) {
    switch (format) {
        case Format::json: return to_json(r).dump(2) + "\n";
        case Format::csv: {
            const std::set<std::string_view> detected(r.detected.begin(), r.detected.end());
            std::string out = "word,pair,score,detected\n";
            for (const auto& [word, pairs] : r.per_word_scores)
                for (const auto& p : pairs)
                    out += csv_field(word) + "," + csv_field(p.pair_id) + "," + format_number(p.score) + "," +
                           (detected.contains(word) ? "1" : "0") + "\n";
            return out;
        }
        case Format::svg:
            if (!r.roc) throw Error(ErrorCategory::parameter, "SVG output needs an ROC-selected threshold");
            return render(*r.roc, Format::svg);
    }
    throw Error(ErrorCategory::parameter, "unknown output format");
}

std::string render(const WeatOutcome& o, std::string_view label, Format format) {
    switch (format) {
        case Format::json: return to_json(o, label).dump(2) + "\n";
        case Format::csv:
            return "label,effect_size,p_value,test_statistic,p_mode,p_count\n" + csv_field(label) + "," +
                   format_number(o.effect_size) + "," + format_number(o.p_value) + "," +
                   format_number(o.test_statistic) + "," + kind_name(o.p_kind) + "," + std::to_string(o.p_count) +
                   "\n";
        case Format::svg: throw Error(ErrorCategory::parameter, "SVG output is not available for a single WEAT");
    }
    throw Error(ErrorCategory::parameter, "unknown output format");
}

}  // namespace biaslens
