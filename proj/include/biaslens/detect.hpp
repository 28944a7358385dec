#pragma once

#include "biaslens/embed_store.hpp"

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace biaslens {

/// One social category with its subcategory labels (e.g. race: three labels).
struct Category {
    std::string name;
    std::vector<std::string> labels;

    friend bool operator==(const Category&, const Category&) = default;
};

/// An intersectional group: one row label crossed with one column label.
struct Cell {
    std::string id;
    std::size_t row = 0;
    std::size_t col = 0;
    std::vector<std::string> names;

    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Two categories with M and N subcategories and a name list per cell.
struct GroupGrid {
    Category rows;
    Category cols;
    std::vector<Cell> cells;

    /// M >= 2, N >= 2, exactly one cell per (row, col), unique ids, non-empty and
    /// pairwise disjoint name lists.
    void validate() const;

    const Cell& cell(std::string_view id) const;
    /// Union of the names of every cell in a row (or column), in cell order.
    std::vector<std::string> row_names(std::size_t row) const;
    std::vector<std::string> col_names(std::size_t col) const;

    friend bool operator==(const GroupGrid&, const GroupGrid&) = default;
};

enum class EibdRemoval {
    /// Drop a word scoring above the threshold in any single-category pair.
    any_constituent,
    /// Drop a word only when it scores above the threshold in every
    /// non-trivial single-category pair (union of per-pair differences).
    all_constituents,
};

struct DetectionConfig {
    std::string target_cell;
    std::vector<std::string> candidate_pool;
    double threshold = 0.0;
    EibdRemoval removal = EibdRemoval::any_constituent;
};

using Labels = std::map<std::string, bool, std::less<>>;

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double accuracy = 0.0;
};

struct RocPoint {
    double threshold;
    double tpr;
    double fpr;
};

struct ThresholdChoice {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    std::size_t tp = 0;
    std::vector<RocPoint> roc_points;  // ascending threshold
};

struct PairScore {
    std::string pair_id;
    double score;
};

struct DetectionResult {
    std::string target_cell;
    std::vector<std::string> detected;  // candidate-pool order
    std::map<std::string, std::vector<PairScore>, std::less<>> per_word_scores;
    double threshold_used = 0.0;
    std::optional<Confusion> confusion;
    std::optional<ThresholdChoice> roc;
};

/// std_assoc(w, first, second) for every w in `words`. All missing words and
/// names are reported in one MissingWordError.
std::map<std::string, double, std::less<>> score_attributes(std::span<const std::string> words,
                                                            std::span<const std::string> first,
                                                            std::span<const std::string> second,
                                                            const EmbeddingTable& table);

/// Picks the threshold maximizing TPR - FPR among the observed scores, with the
/// detection rule score > t. Ties go to the higher TP count, then to the lower
/// threshold.
ThresholdChoice select_threshold(const std::map<std::string, double, std::less<>>& scores, const Labels& labels);

/// Confusion counts of `detected` against `truth`; the universe is truth's domain.
Confusion evaluate(std::span<const std::string> detected, const Labels& truth);

/// Every pair score needed by detection for one target cell, computed once.
class ScoreMatrix {
public:
    ScoreMatrix(const GroupGrid& grid, std::string_view target_cell, std::span<const std::string> pool,
                const EmbeddingTable& table);

    const std::vector<std::string>& pool() const noexcept { return pool_; }
    /// Intersectional pairs (target, C_ij) for every cell, target's self-pair included.
    const std::vector<std::string>& intersectional_pairs() const noexcept { return ib_pairs_; }
    /// Single-category pairs (target row vs other row, target col vs other col).
    const std::vector<std::string>& constituent_pairs() const noexcept { return cons_pairs_; }

    double intersectional(std::size_t word, std::size_t pair) const { return ib_[word * ib_pairs_.size() + pair]; }
    double constituent(std::size_t word, std::size_t pair) const {
        return cons_[word * cons_pairs_.size() + pair];
    }

    /// W_IB at threshold t, pool order.
    std::vector<std::string> intersectional_set(double t) const;
    /// W_EIB at threshold t, pool order.
    std::vector<std::string> emergent_set(double t, EibdRemoval removal) const;

    /// Largest intersectional score per word (W_IB membership is max > t).
    std::map<std::string, double, std::less<>> max_intersectional() const;
    /// Every distinct score in the matrix, ascending.
    std::vector<double> observed_scores() const;

    std::map<std::string, std::vector<PairScore>, std::less<>> per_word(bool include_constituent) const;

private:
    std::vector<std::string> pool_;
    std::vector<std::string> ib_pairs_;
    std::vector<std::string> cons_pairs_;
    std::vector<double> ib_;
    std::vector<double> cons_;
};

/// IBD: union over pairs (target, C_ij) of pool words with association score > t.
DetectionResult detect_intersectional(const GroupGrid& grid, const DetectionConfig& cfg, const EmbeddingTable& table,
                                      const std::optional<Labels>& truth = std::nullopt);

/// EIBD: W_IB with single-category associations removed per `cfg.removal`,
/// using the same threshold for both stages.
DetectionResult detect_emergent(const GroupGrid& grid, const DetectionConfig& cfg, const EmbeddingTable& table,
                                const std::optional<Labels>& truth = std::nullopt);

/// Threshold from the IBD ROC curve (per-word maximum pair score).
ThresholdChoice roc_intersectional(const ScoreMatrix& matrix, const Labels& truth);

/// Threshold sweep for EIBD over every observed score, evaluating the full
/// two-stage rule at each candidate; same objective and tie rules as
/// select_threshold.
ThresholdChoice roc_emergent(const ScoreMatrix& matrix, EibdRemoval removal, const Labels& truth);

/// Runs IBD or EIBD with an ROC-selected threshold; cfg.threshold is ignored.
DetectionResult detect_intersectional_auto(const GroupGrid& grid, DetectionConfig cfg, const EmbeddingTable& table,
                                           const Labels& truth);
DetectionResult detect_emergent_auto(const GroupGrid& grid, DetectionConfig cfg, const EmbeddingTable& table,
                                     const Labels& truth);

}  // namespace biaslens

// ---------------------------------------------------------------------------
// JSON documents

namespace biaslens {

/// {"rows": {"name", "labels"}, "cols": {"name", "labels"},
///  "cells": [{"id", "row": <row label>, "col": <col label>, "names": [...]}]}
GroupGrid parse_grid(std::string_view json_text, std::string_view origin = "<grid>");
GroupGrid load_grid(const std::filesystem::path& path);
std::string grid_to_json(const GroupGrid& grid);

/// {"target_cell", "candidate_pool": [...], "threshold", "eibd_removal": "any-constituent" | "all-constituents"}
DetectionConfig parse_detection_config(std::string_view json_text, std::string_view origin = "<config>");
std::string detection_config_to_json(const DetectionConfig& cfg);

EibdRemoval parse_removal(std::string_view name);
std::string_view removal_name(EibdRemoval removal);

/// Candidate pool file: {"candidates": [...], "ibd_positives": [...], "eibd_positives": [...]}.
/// Positive lists are optional; when present, every other candidate is a negative.
struct CandidatePool {
    std::vector<std::string> candidates;
    std::optional<Labels> ibd_labels;
    std::optional<Labels> eibd_labels;
};
CandidatePool parse_pool(std::string_view json_text, std::string_view origin = "<pool>");
CandidatePool load_pool(const std::filesystem::path& path);

}  // namespace biaslens
