#include "biaslens/embed_store.hpp"

#include "biaslens/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace biaslens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool all_finite(std::span<const float> values) {
    for (float v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string_view next_token(std::string_view line, std::size_t& pos) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    return line.substr(start, pos - start);
}

Error format_error(const fs::path& path, std::size_t line_no, const std::string& what) {
    return Error(ErrorCategory::format, path.string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw Error(ErrorCategory::validation, "embedding dimension must be positive");
}

void EmbeddingTable::add(std::string word, std::span<const float> values) {
    if (word.empty()) throw Error(ErrorCategory::format, "empty word");
    if (values.size() != dimension_)
        throw Error(ErrorCategory::format, "vector for \"" + word + "\" has dimension " +
                                               std::to_string(values.size()) + ", expected " +
                                               std::to_string(dimension_));
    if (!all_finite(values))
        throw Error(ErrorCategory::validation, "non-finite component in vector for \"" + word + "\"");
    if (index_.contains(word)) throw Error(ErrorCategory::format, "duplicate word \"" + word + "\"");
    index_.emplace(word, words_.size());
    words_.push_back(std::move(word));
    data_.insert(data_.end(), values.begin(), values.end());
}

bool EmbeddingTable::contains(std::string_view word) const { return index_.contains(std::string(word)); }

Vector EmbeddingTable::lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) throw MissingWordError({std::string(word)});
    return Vector(data_).subspan(it->second * dimension_, dimension_);
}

EmbeddingTable load_swe(const fs::path& path,
                        const std::optional<std::set<std::string, std::less<>>>& vocab_filter) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open embedding file " + path.string());

    std::optional<EmbeddingTable> table;
    std::vector<float> row;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string_view view(line);
        std::size_t pos = 0;
        const std::string_view word = next_token(view, pos);
        if (word.empty()) {
            if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
            throw format_error(path, line_no, "missing word");
        }
        if (vocab_filter && !vocab_filter->contains(word)) continue;

        row.clear();
        for (std::string_view tok = next_token(view, pos); !tok.empty(); tok = next_token(view, pos)) {
            float value = 0.0f;
            auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
            if (ec != std::errc() || end != tok.data() + tok.size())
                throw format_error(path, line_no, "unparsable component \"" + std::string(tok) + "\"");
            row.push_back(value);
        }
        if (row.empty()) throw format_error(path, line_no, "no vector components");
        if (!table) table.emplace(row.size());
        if (row.size() != table->dimension())
            throw format_error(path, line_no,
                               "inconsistent dimension " + std::to_string(row.size()) + ", expected " +
                                   std::to_string(table->dimension()));
        try {
            table->add(std::string(word), row);
        } catch (const Error& e) {
            throw Error(e.category(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (in.bad()) throw Error(ErrorCategory::io, "read failure on " + path.string());
    if (!table) throw Error(ErrorCategory::format, path.string() + ": no embedding rows");
    return std::move(*table);
}

// ---------------------------------------------------------------------------
// EmbeddingBank

bool operator==(const BankEntry& a, const BankEntry& b) {
    return a.sentence_ids == b.sentence_ids && a.vectors.size() == b.vectors.size() &&
           std::memcmp(a.vectors.data(), b.vectors.data(), a.vectors.size() * sizeof(float)) == 0;
}

bool EmbeddingBank::contains(std::string_view stimulus) const { return stimuli_.contains(stimulus); }

const BankEntry& EmbeddingBank::entry(std::string_view stimulus) const {
    auto it = stimuli_.find(stimulus);
    if (it == stimuli_.end()) throw MissingWordError({std::string(stimulus)});
    return it->second;
}

Vector EmbeddingBank::vector(std::string_view stimulus, std::size_t index) const {
    const BankEntry& e = entry(stimulus);
    if (index >= e.count())
        throw Error(ErrorCategory::parameter, "vector index " + std::to_string(index) + " out of range for \"" +
                                                  std::string(stimulus) + "\" (count " +
                                                  std::to_string(e.count()) + ")");
    return Vector(e.vectors).subspan(index * dimension_, dimension_);
}

void EmbeddingBank::set(std::string stimulus, std::vector<std::string> sentence_ids, std::vector<float> vectors,
                        std::string file) {
    BankEntry e{std::move(sentence_ids), std::move(vectors), std::move(file)};
    stimuli_.insert_or_assign(std::move(stimulus), std::move(e));
}

void EmbeddingBank::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCategory::validation, msg); };
    if (dimension_ == 0) fail("bank dimension must be positive");
    std::set<std::string, std::less<>> files;
    for (const auto& [stimulus, e] : stimuli_) {
        if (stimulus.empty()) fail("empty stimulus name");
        if (e.count() == 0) fail("stimulus \"" + stimulus + "\" has no vectors");
        if (e.vectors.size() != e.count() * dimension_)
            fail("stimulus \"" + stimulus + "\" holds " + std::to_string(e.vectors.size()) +
                 " values, expected " + std::to_string(e.count() * dimension_));
        if (!all_finite(e.vectors)) fail("non-finite component in vectors of \"" + stimulus + "\"");
        if (!e.file.empty()) {
            fs::path p(e.file);
            if (p.is_absolute() || p.filename() != p || e.file == kBankManifestName)
                fail("invalid vector file name \"" + e.file + "\" for \"" + stimulus + "\"");
            if (!files.insert(e.file).second) fail("vector file \"" + e.file + "\" used twice");
        }
    }
}

std::string default_bank_file_name(std::size_t ordinal, std::string_view stimulus) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string name = std::to_string(ordinal) + "_";
    for (unsigned char c : stimulus) {
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_') {
            name += static_cast<char>(c);
        } else {
            name += '%';
            name += hex[c >> 4];
            name += hex[c & 0xF];
        }
    }
    return name + ".f32";
}

namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    return v;
}

std::vector<float> read_vector_file(const fs::path& path, std::size_t expected_values, std::string_view stimulus) {
    std::error_code ec;
    const auto bytes = fs::file_size(path, ec);
    if (ec) throw Error(ErrorCategory::format, "vector file " + path.string() + " for \"" + std::string(stimulus) +
                                                   "\" is missing");
    if (bytes != expected_values * sizeof(float))
        throw Error(ErrorCategory::corruption, "vector file " + path.string() + " has " + std::to_string(bytes) +
                                                   " bytes, expected " +
                                                   std::to_string(expected_values * sizeof(float)));
    std::vector<std::uint32_t> raw(expected_values);
    std::ifstream in(path, std::ios::binary);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes)))
        throw Error(ErrorCategory::io, "cannot read " + path.string());
    std::vector<float> values(expected_values);
    for (std::size_t i = 0; i < expected_values; ++i) values[i] = std::bit_cast<float>(to_little(raw[i]));
    return values;
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
        throw Error(ErrorCategory::format, "manifest: missing field " + where + "." + key);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCategory::format, "manifest: field " + where + "." + key + " has the wrong type");
    }
}

}  // namespace

EmbeddingBank load_bank(const fs::path& dir) {
    const fs::path manifest_path = dir / kBankManifestName;
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCategory::format, "bank directory " + dir.string() + " has no " + kBankManifestName);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::format, manifest_path.string() + ": " + e.what());
    }

    const int version = require_field<int>(manifest, "format_version", "$");
    if (version != kBankFormatVersion)
        throw Error(ErrorCategory::format, "unsupported bank format_version " + std::to_string(version));
    const auto dimension = require_field<long long>(manifest, "dimension", "$");
    if (dimension <= 0) throw Error(ErrorCategory::format, "manifest: dimension must be positive");
    EmbeddingBank bank(static_cast<std::size_t>(dimension), require_field<std::string>(manifest, "model_id", "$"));

    if (!manifest.contains("stimuli") || !manifest["stimuli"].is_object())
        throw Error(ErrorCategory::format, "manifest: missing object field $.stimuli");
    for (const auto& [stimulus, meta] : manifest["stimuli"].items()) {
        const std::string where = "$.stimuli[\"" + stimulus + "\"]";
        const auto count = require_field<long long>(meta, "count", where);
        auto ids = require_field<std::vector<std::string>>(meta, "sentence_ids", where);
        auto file = require_field<std::string>(meta, "file", where);
        if (count < 1) throw Error(ErrorCategory::format, "manifest: " + where + ".count must be >= 1");
        if (ids.size() != static_cast<std::size_t>(count))
            throw Error(ErrorCategory::format, "manifest: " + where + " lists " + std::to_string(ids.size()) +
                                                   " sentence ids for count " + std::to_string(count));
        fs::path rel(file);
        if (file.empty() || rel.is_absolute() || rel.filename() != rel)
            throw Error(ErrorCategory::format, "manifest: " + where + ".file must be a plain file name");
        auto values = read_vector_file(dir / rel, static_cast<std::size_t>(count) * bank.dimension(), stimulus);
        if (!std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); }))
            throw Error(ErrorCategory::corruption, "non-finite component in vectors of \"" + stimulus + "\"");
        bank.set(stimulus, std::move(ids), std::move(values), std::move(file));
    }
    bank.validate();
    return bank;
}

void write_bank(const EmbeddingBank& bank, const fs::path& dir) {
    bank.validate();

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());

    std::set<std::string, std::less<>> taken;
    for (const auto& [_, e] : bank.stimuli())
        if (!e.file.empty()) taken.insert(e.file);

    json stimuli = json::object();
    std::size_t ordinal = 0;
    for (const auto& [stimulus, e] : bank.stimuli()) {
        std::string file = e.file;
        while (file.empty() || (e.file.empty() && taken.contains(file))) {
            file = default_bank_file_name(ordinal++, stimulus);
        }
        taken.insert(file);

        const fs::path path = dir / file;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
        std::vector<std::uint32_t> raw(e.vectors.size());
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_little(std::bit_cast<std::uint32_t>(e.vectors[i]));
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
        if (!out) throw Error(ErrorCategory::io, "write failure on " + path.string());

        stimuli[stimulus] = {{"count", e.count()}, {"sentence_ids", e.sentence_ids}, {"file", file}};
    }

    json manifest = {{"format_version", kBankFormatVersion},
                     {"model_id", bank.model_id()},
                     {"dimension", bank.dimension()},
                     {"stimuli", std::move(stimuli)}};
    const fs::path manifest_path = dir / kBankManifestName;
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorCategory::io, "write failure on " + manifest_path.string());
}

}  // namespace biaslens
