#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biaslens {

enum class ErrorCategory {
    format,
    missing_word,
    corruption,
    validation,
    degenerate,
    budget,
    parameter,
    io,
    coverage,
    undefined_roc,
};

std::string_view category_name(ErrorCategory category);

/// Every recoverable failure in the library is reported through this type.
/// The category is machine-readable; the CLI maps it to an exit code and an
/// `E:<category>:` prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Raised when one or more words cannot be resolved. Carries every missing
/// word so callers can report them at once.
class MissingWordError : public Error {
public:
    explicit MissingWordError(std::vector<std::string> words);

    const std::vector<std::string>& words() const noexcept { return words_; }

private:
    std::vector<std::string> words_;
};

}  // namespace biaslens
