#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace biaslens {

/// Provenance emitted with every CLI run. Everything except the timestamp is
/// enough to reproduce the run's primary output byte for byte.
struct RunManifest {
    std::vector<std::string> command_line;
    std::uint64_t seed = 0;
    std::optional<std::size_t> samples;
    std::map<std::string, std::string> input_digests;  // input path -> "sha256:<hex>"
    std::string tool_version;
    std::string timestamp;  // UTC, ISO-8601

    nlohmann::ordered_json to_json() const;
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 of a regular file, or of a directory's files (relative name and
/// content, sorted by name), prefixed with "sha256:".
std::string content_digest(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace biaslens
