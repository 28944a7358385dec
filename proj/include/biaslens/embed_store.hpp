#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biaslens {

using Vector = std::span<const float>;

/// What to do when a requested word is absent from a table or bank.
enum class OovPolicy { error, skip_with_warning };

/// Static word embeddings: one fixed-dimension vector per word. Rows live in a
/// single contiguous buffer; lookups are exact and case-sensitive.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension);

    /// Adds a row. Throws on dimension mismatch, duplicate word, empty word or
    /// non-finite component.
    void add(std::string word, std::span<const float> values);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return words_.size(); }
    bool empty() const noexcept { return words_.empty(); }
    bool contains(std::string_view word) const;

    /// Throws MissingWordError carrying `word` when absent.
    Vector lookup(std::string_view word) const;

    const std::vector<std::string>& words() const noexcept { return words_; }

private:
    std::size_t dimension_;
    std::vector<std::string> words_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a GloVe-style text file ("word c1 ... cD" per line). The dimension is
/// taken from the first retained line. With a filter, lines for other words are
/// skipped without being parsed.
EmbeddingTable load_swe(const std::filesystem::path& path,
                        const std::optional<std::set<std::string, std::less<>>>& vocab_filter = std::nullopt);

/// Contextualized vectors of one stimulus, one row per sentence occurrence.
struct BankEntry {
    std::vector<std::string> sentence_ids;
    std::vector<float> vectors;  // row-major, count() x dimension
    std::string file;            // relative file name inside the bank directory

    std::size_t count() const noexcept { return sentence_ids.size(); }

    /// Compares ids and vector bits; the storage file name is not part of the value.
    friend bool operator==(const BankEntry& a, const BankEntry& b);
};

class EmbeddingBank {
public:
    EmbeddingBank() = default;
    EmbeddingBank(std::size_t dimension, std::string model_id)
        : dimension_(dimension), model_id_(std::move(model_id)) {}

    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& model_id() const noexcept { return model_id_; }
    const std::map<std::string, BankEntry, std::less<>>& stimuli() const noexcept { return stimuli_; }

    bool contains(std::string_view stimulus) const;
    const BankEntry& entry(std::string_view stimulus) const;
    std::size_t count(std::string_view stimulus) const { return entry(stimulus).count(); }
    Vector vector(std::string_view stimulus, std::size_t index) const;

    /// Inserts or replaces a stimulus. `vectors` must hold sentence_ids.size()
    /// rows. An empty `file` gets a generated name on write.
    void set(std::string stimulus, std::vector<std::string> sentence_ids, std::vector<float> vectors,
             std::string file = {});

    /// Checks every structural invariant; throws Error(validation) otherwise.
    void validate() const;

    friend bool operator==(const EmbeddingBank&, const EmbeddingBank&) = default;

private:
    std::size_t dimension_ = 0;
    std::string model_id_;
    std::map<std::string, BankEntry, std::less<>> stimuli_;
};

inline constexpr int kBankFormatVersion = 1;
inline constexpr const char* kBankManifestName = "manifest.json";

EmbeddingBank load_bank(const std::filesystem::path& dir);

/// Validates, then writes manifest.json plus one raw little-endian float32 file
/// per stimulus. Creates the directory if needed.
void write_bank(const EmbeddingBank& bank, const std::filesystem::path& dir);

/// File name used for a stimulus that has none recorded.
std::string default_bank_file_name(std::size_t ordinal, std::string_view stimulus);

}  // namespace biaslens
