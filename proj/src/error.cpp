#include "biaslens/error.hpp"

namespace biaslens {

std::string_view category_name(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::format: return "format";
        case ErrorCategory::missing_word: return "missing-word";
        case ErrorCategory::corruption: return "corruption";
        case ErrorCategory::validation: return "validation";
        case ErrorCategory::degenerate: return "degenerate";
        case ErrorCategory::budget: return "budget";
        case ErrorCategory::parameter: return "parameter";
        case ErrorCategory::io: return "io";
        case ErrorCategory::coverage: return "coverage";
        case ErrorCategory::undefined_roc: return "undefined-roc";
    }
    return "unknown";
}

namespace {

std::string missing_message(const std::vector<std::string>& words) {
    std::string msg = words.size() == 1 ? "missing word: " : "missing words: ";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) msg += ", ";
        msg += '"' + words[i] + '"';
    }
    return msg;
}

}  // namespace

MissingWordError::MissingWordError(std::vector<std::string> words)
    : Error(ErrorCategory::missing_word, missing_message(words)), words_(std::move(words)) {}

}  // namespace biaslens
