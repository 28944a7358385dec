#include "biaslens/detect.hpp"

#include "biaslens/error.hpp"
#include "biaslens/weat.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace biaslens {

// ---------------------------------------------------------------------------
// GroupGrid

void GroupGrid::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCategory::validation, "group grid: " + msg); };
    if (rows.labels.size() < 2) fail("category \"" + rows.name + "\" needs at least 2 subcategories");
    if (cols.labels.size() < 2) fail("category \"" + cols.name + "\" needs at least 2 subcategories");
    if (cells.size() != rows.labels.size() * cols.labels.size())
        fail("expected " + std::to_string(rows.labels.size() * cols.labels.size()) + " cells, found " +
             std::to_string(cells.size()));
    std::set<std::string_view> ids;
    std::set<std::pair<std::size_t, std::size_t>> positions;
    std::map<std::string_view, std::string_view> owner;
    for (const Cell& c : cells) {
        if (c.id.empty()) fail("cell with empty id");
        if (!ids.insert(c.id).second) fail("duplicate cell id \"" + c.id + "\"");
        if (c.row >= rows.labels.size() || c.col >= cols.labels.size()) fail("cell \"" + c.id + "\" out of range");
        if (!positions.insert({c.row, c.col}).second) fail("cell \"" + c.id + "\" duplicates a grid position");
        if (c.names.empty()) fail("cell \"" + c.id + "\" has no names");
        for (const auto& n : c.names) {
            auto [it, inserted] = owner.emplace(n, c.id);
            if (!inserted)
                fail("name \"" + n + "\" appears in cells \"" + std::string(it->second) + "\" and \"" + c.id + "\"");
        }
    }
}

const Cell& GroupGrid::cell(std::string_view id) const {
    for (const Cell& c : cells)
        if (c.id == id) return c;
    throw Error(ErrorCategory::validation, "group grid has no cell \"" + std::string(id) + "\"");
}

std::vector<std::string> GroupGrid::row_names(std::size_t row) const {
    std::vector<std::string> out;
    for (const Cell& c : cells)
        if (c.row == row) out.insert(out.end(), c.names.begin(), c.names.end());
    return out;
}

std::vector<std::string> GroupGrid::col_names(std::size_t col) const {
    std::vector<std::string> out;
    for (const Cell& c : cells)
        if (c.col == col) out.insert(out.end(), c.names.begin(), c.names.end());
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

std::map<std::string, double, std::less<>> score_attributes(std::span<const std::string> words,
                                                            std::span<const std::string> first,
                                                            std::span<const std::string> second,
                                                            const EmbeddingTable& table) {
    std::vector<std::string> all(words.begin(), words.end());
    all.insert(all.end(), first.begin(), first.end());
    all.insert(all.end(), second.begin(), second.end());
    lookup_all(all, table);
    const auto va = lookup_all(first, table);
    const auto vb = lookup_all(second, table);
    std::map<std::string, double, std::less<>> out;
    for (const auto& w : words) out.emplace(w, std_assoc(table.lookup(w), va, vb));
    return out;
}

namespace {

std::vector<std::string> dedupe(std::span<const std::string> words) {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const auto& w : words)
        if (seen.insert(w).second) out.push_back(w);
    return out;
}

void check_all_present(const GroupGrid& grid, std::span<const std::string> pool, const EmbeddingTable& table) {
    std::vector<std::string> missing;
    std::set<std::string_view> seen;
    auto check = [&](const std::string& w) {
        if (seen.insert(w).second && !table.contains(w)) missing.push_back(w);
    };
    for (const auto& w : pool) check(w);
    for (const Cell& c : grid.cells)
        for (const auto& n : c.names) check(n);
    if (!missing.empty()) throw MissingWordError(std::move(missing));
}

}  // namespace

ScoreMatrix::ScoreMatrix(const GroupGrid& grid, std::string_view target_cell, std::span<const std::string> pool,
                         const EmbeddingTable& table)
    : pool_(dedupe(pool)) {
    grid.validate();
    if (pool_.empty()) throw Error(ErrorCategory::validation, "candidate pool is empty");
    const Cell& target = grid.cell(target_cell);
    check_all_present(grid, pool_, table);

    const auto target_vecs = lookup_all(target.names, table);
    std::vector<Vector> words;
    for (const auto& w : pool_) words.push_back(table.lookup(w));

    // Intersectional pairs, grid order. The self-pair scores exactly 0.
    std::vector<std::vector<double>> columns;
    for (const Cell& c : grid.cells) {
        ib_pairs_.push_back(target.id + "/" + c.id);
        std::vector<double> col(words.size(), 0.0);
        if (c.id != target.id) {
            const auto other = lookup_all(c.names, table);
            for (std::size_t i = 0; i < words.size(); ++i) col[i] = std_assoc(words[i], target_vecs, other);
        }
        columns.push_back(std::move(col));
    }
    ib_.resize(words.size() * columns.size());
    for (std::size_t p = 0; p < columns.size(); ++p)
        for (std::size_t i = 0; i < words.size(); ++i) ib_[i * columns.size() + p] = columns[p][i];

    // Single-category pairs against every other subcategory.
    columns.clear();
    auto add_constituent = [&](const std::string& id, const std::vector<std::string>& mine,
                               const std::vector<std::string>& theirs) {
        cons_pairs_.push_back(id);
        const auto va = lookup_all(mine, table);
        const auto vb = lookup_all(theirs, table);
        std::vector<double> col(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) col[i] = std_assoc(words[i], va, vb);
        columns.push_back(std::move(col));
    };
    const auto mine_row = grid.row_names(target.row);
    for (std::size_t r = 0; r < grid.rows.labels.size(); ++r)
        if (r != target.row)
            add_constituent(grid.rows.labels[target.row] + "/" + grid.rows.labels[r], mine_row, grid.row_names(r));
    const auto mine_col = grid.col_names(target.col);
    for (std::size_t c = 0; c < grid.cols.labels.size(); ++c)
        if (c != target.col)
            add_constituent(grid.cols.labels[target.col] + "/" + grid.cols.labels[c], mine_col, grid.col_names(c));
    cons_.resize(words.size() * columns.size());
    for (std::size_t p = 0; p < columns.size(); ++p)
        for (std::size_t i = 0; i < words.size(); ++i) cons_[i * columns.size() + p] = columns[p][i];
}

std::vector<std::string> ScoreMatrix::intersectional_set(double t) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < pool_.size(); ++i)
        for (std::size_t p = 0; p < ib_pairs_.size(); ++p)
            if (intersectional(i, p) > t) {
                out.push_back(pool_[i]);
                break;
            }
    return out;
}

std::vector<std::string> ScoreMatrix::emergent_set(double t, EibdRemoval removal) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        bool in_ib = false;
        for (std::size_t p = 0; p < ib_pairs_.size() && !in_ib; ++p) in_ib = intersectional(i, p) > t;
        if (!in_ib) continue;
        std::size_t above = 0;
        for (std::size_t p = 0; p < cons_pairs_.size(); ++p)
            if (constituent(i, p) > t) ++above;
        const bool remove = removal == EibdRemoval::any_constituent ? above > 0 : above == cons_pairs_.size();
        if (!remove) out.push_back(pool_[i]);
    }
    return out;
}

std::map<std::string, double, std::less<>> ScoreMatrix::max_intersectional() const {
    std::map<std::string, double, std::less<>> out;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        double best = -INFINITY;
        for (std::size_t p = 0; p < ib_pairs_.size(); ++p) best = std::max(best, intersectional(i, p));
        out.emplace(pool_[i], best);
    }
    return out;
}

std::vector<double> ScoreMatrix::observed_scores() const {
    std::vector<double> all(ib_);
    all.insert(all.end(), cons_.begin(), cons_.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

std::map<std::string, std::vector<PairScore>, std::less<>> ScoreMatrix::per_word(bool include_constituent) const {
    std::map<std::string, std::vector<PairScore>, std::less<>> out;
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        auto& row = out[pool_[i]];
        for (std::size_t p = 0; p < ib_pairs_.size(); ++p) row.push_back({ib_pairs_[p], intersectional(i, p)});
        if (include_constituent)
            for (std::size_t p = 0; p < cons_pairs_.size(); ++p) row.push_back({cons_pairs_[p], constituent(i, p)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Thresholds and evaluation

Confusion evaluate(std::span<const std::string> detected, const Labels& truth) {
    std::set<std::string_view> hit;
    for (const auto& w : detected) {
        if (!truth.contains(w)) throw Error(ErrorCategory::coverage, "detected word \"" + w + "\" has no label");
        hit.insert(w);
    }
    Confusion c;
    for (const auto& [word, positive] : truth) {
        const bool found = hit.contains(word);
        if (positive)
            (found ? c.tp : c.fn)++;
        else
            (found ? c.fp : c.tn)++;
    }
    const std::size_t total = c.tp + c.fp + c.tn + c.fn;
    c.accuracy = total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
    return c;
}

namespace {

/// Shared ROC selection over candidate thresholds (ascending, distinct).
ThresholdChoice choose(const std::vector<double>& candidates,
                       const std::function<Confusion(double)>& confusion_at) {
    ThresholdChoice best;
    bool have = false;
    long long best_num = 0;  // (TPR - FPR) * P * N, exact in integers
    for (double t : candidates) {
        const Confusion c = confusion_at(t);
        const auto pos = static_cast<long long>(c.tp + c.fn);
        const auto neg = static_cast<long long>(c.fp + c.tn);
        if (pos == 0 || neg == 0)
            throw Error(ErrorCategory::undefined_roc, "ROC needs at least one positive and one negative label");
        const double tpr = static_cast<double>(c.tp) / static_cast<double>(pos);
        const double fpr = static_cast<double>(c.fp) / static_cast<double>(neg);
        best.roc_points.push_back({t, tpr, fpr});
        const long long num = static_cast<long long>(c.tp) * neg - static_cast<long long>(c.fp) * pos;
        // Candidates ascend, so keeping the first of equal (J, TP) keeps the lowest threshold.
        if (!have || num > best_num || (num == best_num && c.tp > best.tp)) {
            have = true;
            best_num = num;
            best.threshold = t;
            best.tpr = tpr;
            best.fpr = fpr;
            best.tp = c.tp;
        }
    }
    return best;
}

void check_two_classes(const Labels& labels) {
    bool pos = false, neg = false;
    for (const auto& [_, l] : labels) (l ? pos : neg) = true;
    if (!pos || !neg)
        throw Error(ErrorCategory::undefined_roc, "ROC needs at least one positive and one negative label");
}

void check_coverage(std::span<const std::string> pool, const Labels& truth) {
    for (const auto& w : pool)
        if (!truth.contains(w)) throw Error(ErrorCategory::coverage, "candidate \"" + w + "\" has no label");
}

Labels restrict(const Labels& truth, std::span<const std::string> pool) {
    Labels out;
    for (const auto& w : pool) out.emplace(w, truth.find(w)->second);
    return out;
}

}  // namespace

ThresholdChoice select_threshold(const std::map<std::string, double, std::less<>>& scores, const Labels& labels) {
    Labels universe;
    for (const auto& [word, score] : scores) {
        auto it = labels.find(word);
        if (it == labels.end()) throw Error(ErrorCategory::coverage, "scored word \"" + word + "\" has no label");
        if (!std::isfinite(score)) throw Error(ErrorCategory::validation, "non-finite score for \"" + word + "\"");
        universe.emplace(word, it->second);
    }
    check_two_classes(universe);
    std::vector<double> candidates;
    for (const auto& [_, s] : scores) candidates.push_back(s);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    return choose(candidates, [&](double t) {
        std::vector<std::string> detected;
        for (const auto& [word, s] : scores)
            if (s > t) detected.push_back(word);
        return evaluate(detected, universe);
    });
}

ThresholdChoice roc_intersectional(const ScoreMatrix& matrix, const Labels& truth) {
    check_coverage(matrix.pool(), truth);
    return select_threshold(matrix.max_intersectional(), restrict(truth, matrix.pool()));
}

ThresholdChoice roc_emergent(const ScoreMatrix& matrix, EibdRemoval removal, const Labels& truth) {
    check_coverage(matrix.pool(), truth);
    const Labels universe = restrict(truth, matrix.pool());
    check_two_classes(universe);
    return choose(matrix.observed_scores(),
                  [&](double t) { return evaluate(matrix.emergent_set(t, removal), universe); });
}

// ---------------------------------------------------------------------------
// Detection

namespace {

void check_threshold(double t) {
    if (!std::isfinite(t)) throw Error(ErrorCategory::parameter, "detection threshold must be finite");
}

DetectionResult finish(const ScoreMatrix& matrix, std::string target, std::vector<std::string> detected, double t,
                       bool constituent, const std::optional<Labels>& truth) {
    DetectionResult r;
    r.target_cell = std::move(target);
    r.detected = std::move(detected);
    r.per_word_scores = matrix.per_word(constituent);
    r.threshold_used = t;
    if (truth) {
        check_coverage(matrix.pool(), *truth);
        r.confusion = evaluate(r.detected, restrict(*truth, matrix.pool()));
    }
    return r;
}

}  // namespace

DetectionResult detect_intersectional(const GroupGrid& grid, const DetectionConfig& cfg, const EmbeddingTable& table,
                                      const std::optional<Labels>& truth) {
    check_threshold(cfg.threshold);
    const ScoreMatrix matrix(grid, cfg.target_cell, cfg.candidate_pool, table);
    return finish(matrix, cfg.target_cell, matrix.intersectional_set(cfg.threshold), cfg.threshold, false, truth);
}

DetectionResult detect_emergent(const GroupGrid& grid, const DetectionConfig& cfg, const EmbeddingTable& table,
                                const std::optional<Labels>& truth) {
    check_threshold(cfg.threshold);
    const ScoreMatrix matrix(grid, cfg.target_cell, cfg.candidate_pool, table);
    return finish(matrix, cfg.target_cell, matrix.emergent_set(cfg.threshold, cfg.removal), cfg.threshold, true,
                  truth);
}

DetectionResult detect_intersectional_auto(const GroupGrid& grid, DetectionConfig cfg, const EmbeddingTable& table,
                                           const Labels& truth) {
    const ScoreMatrix matrix(grid, cfg.target_cell, cfg.candidate_pool, table);
    ThresholdChoice choice = roc_intersectional(matrix, truth);
    DetectionResult r =
        finish(matrix, cfg.target_cell, matrix.intersectional_set(choice.threshold), choice.threshold, false, truth);
    r.roc = std::move(choice);
    return r;
}

DetectionResult detect_emergent_auto(const GroupGrid& grid, DetectionConfig cfg, const EmbeddingTable& table,
                                     const Labels& truth) {
    const ScoreMatrix matrix(grid, cfg.target_cell, cfg.candidate_pool, table);
    ThresholdChoice choice = roc_emergent(matrix, cfg.removal, truth);
    DetectionResult r = finish(matrix, cfg.target_cell, matrix.emergent_set(choice.threshold, cfg.removal),
                               choice.threshold, true, truth);
    r.roc = std::move(choice);
    return r;
}

}  // namespace biaslens
