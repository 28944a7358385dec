#pragma once

#include "biaslens/detect.hpp"
#include "biaslens/weat.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace biaslens {

/// Built-in intersectional association tests.
enum class BuiltinTest { I1, I2, I3, I4 };

BuiltinTest parse_builtin_test(std::string_view id);
std::string_view builtin_test_id(BuiltinTest test);

/// Target names and attribute lists of a built-in test, exclusions already applied.
WeatSpec builtin_test(BuiltinTest test);

/// Words left out of a built-in test because they belong to both attribute groups.
std::vector<std::string> builtin_exclusions(BuiltinTest test);

struct ValidationGroup {
    std::string label;
    double random_chance_percent;  // as published, one decimal
    std::vector<std::string> words;
};

/// Labeled attribute words for detection experiments: 18 groups over 98
/// distinct words, including random insect words as true negatives.
struct ValidationDataset {
    std::vector<ValidationGroup> groups;

    const ValidationGroup& group(std::string_view label) const;
    /// Every distinct word in first-appearance order.
    std::vector<std::string> pool() const;
    /// Pool labeled positive exactly for the words of `label`.
    Labels labels_for(std::string_view label) const;
};

const ValidationDataset& validation_set();

/// The 3 x 2 race-by-gender grid with cells AF, AM, EF, EM, MF, MM.
const GroupGrid& builtin_grid();

/// Validation group holding the intersectional (or emergent) biases of a grid cell.
std::string intersectional_group_label(std::string_view cell_id);
std::string emergent_group_label(std::string_view cell_id);

/// Reads a WeatSpec JSON document {"label", "X", "Y", "A", "B"} and validates it.
WeatSpec load_spec(const std::filesystem::path& path);
WeatSpec parse_spec(std::string_view json_text, std::string_view origin = "<spec>");
std::string spec_to_json(const WeatSpec& spec);

/// Bundled data root: $BIASLENS_DATA when set, else the install-time default.
std::filesystem::path data_dir();

}  // namespace biaslens
