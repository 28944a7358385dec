#include "biaslens/run_manifest.hpp"

#include "biaslens/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

namespace biaslens {

namespace fs = std::filesystem;

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error(ErrorCategory::io, "SHA-256 initialisation failed");
    }

    void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_.get(), data, size); }

    void update_file(const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCategory::io, "cannot read " + path.string());
        std::array<char, 1 << 16> buf;
        while (in) {
            in.read(buf.data(), buf.size());
            update(buf.data(), static_cast<std::size_t>(in.gcount()));
        }
    }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md;
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 0xF];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_file(const fs::path& path) {
    Sha256 h;
    h.update_file(path);
    return h.hex();
}

std::string content_digest(const fs::path& path) {
    if (!fs::is_directory(path)) return "sha256:" + sha256_file(path);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path));
    std::sort(files.begin(), files.end());
    Sha256 h;
    for (const auto& rel : files) {
        const std::string name = rel.generic_string();
        h.update(name.data(), name.size() + 1);  // include the terminator as a separator
        h.update(sha256_file(path / rel).data(), 64);
    }
    return "sha256:" + h.hex();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j = {{"tool_version", tool_version}, {"command_line", command_line}, {"seed", seed}};
    j["samples"] = samples ? nlohmann::ordered_json(*samples) : nlohmann::ordered_json(nullptr);
    j["input_digests"] = input_digests;
    j["timestamp"] = timestamp;
    return j;
}

}  // namespace biaslens
