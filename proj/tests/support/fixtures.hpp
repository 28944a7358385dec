#pragma once

#include "biaslens/detect.hpp"
#include "biaslens/embed_store.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace biaslens::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("biaslens_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline EmbeddingTable make_table(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    EmbeddingTable t(rows.at(0).second.size());
    for (const auto& [w, v] : rows) t.add(w, v);
    return t;
}

inline std::vector<float> gaussian(std::mt19937_64& rng, std::size_t dim, double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(n(rng));
    return v;
}

inline std::vector<float> add(std::vector<float> a, const std::vector<float>& b, double scale = 1.0) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(a[i] + scale * b[i]);
    return a;
}

/// Unit vector along a random direction.
inline std::vector<float> direction(std::mt19937_64& rng, std::size_t dim) {
    auto v = gaussian(rng, dim, 1.0);
    double n = 0;
    for (float x : v) n += double(x) * x;
    n = std::sqrt(n);
    for (auto& x : v) x = static_cast<float>(x / n);
    return v;
}

/// 3 x 2 grid with planted associations. Every name of cell (r, c) is
/// race[r] + gender[c] + cell[r][c] + heavy isotropic noise. Attribute words are
/// one shared component plus light noise:
///   "emergent_k"  cell component of the target (AF)  -> intersectional and emergent
///   "race_k"      race component of the target row   -> intersectional only
///   "gender_k"    gender component of the target col -> intersectional only
///   "other_k"     components of other cells/rows/cols -> negatives
///   "random_k"    pure noise                           -> negatives
struct PlantedWorld {
    GroupGrid grid;
    EmbeddingTable table{1};
    std::vector<std::string> pool;
    Labels ibd_truth;
    Labels eibd_truth;
    std::vector<std::string> shared_with_gender;  // in W_IB, removed by EIBD via the gender pair
};

inline PlantedWorld planted_world(std::uint64_t seed, std::size_t dim = 1000, std::size_t names_per_cell = 12,
                                  std::size_t per_kind = 4) {
    std::mt19937_64 rng(seed);
    PlantedWorld w;
    w.grid.rows = {"race", {"R0", "R1", "R2"}};
    w.grid.cols = {"gender", {"G0", "G1"}};
    std::vector<std::vector<float>> race, gender;
    for (int i = 0; i < 3; ++i) race.push_back(direction(rng, dim));
    for (int i = 0; i < 2; ++i) gender.push_back(direction(rng, dim));
    std::vector<std::vector<std::vector<float>>> cell(3);
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    const double name_noise = 4.0 / std::sqrt(double(dim));
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            cell[r].push_back(direction(rng, dim));
            Cell cl;
            cl.id = "C" + std::to_string(r) + std::to_string(c);
            cl.row = r;
            cl.col = c;
            for (std::size_t k = 0; k < names_per_cell; ++k) {
                std::string name = cl.id + "_name" + std::to_string(k);
                auto v = add(add(race[r], gender[c]), cell[r][c]);
                v = add(v, gaussian(rng, dim, name_noise));
                rows.emplace_back(name, v);
                cl.names.push_back(name);
            }
            w.grid.cells.push_back(std::move(cl));
        }
    }
    const double attr_noise = 0.3 / std::sqrt(double(dim));
    auto attribute = [&](const std::string& word, const std::vector<float>& base, bool ib, bool eib) {
        rows.emplace_back(word, add(base, gaussian(rng, dim, attr_noise)));
        w.pool.push_back(word);
        w.ibd_truth[word] = ib;
        w.eibd_truth[word] = eib;
    };
    for (std::size_t k = 0; k < per_kind; ++k) {
        const std::string s = std::to_string(k);
        attribute("emergent_" + s, cell[0][0], true, true);
        attribute("race_" + s, race[0], true, false);
        attribute("gender_" + s, gender[0], true, false);
        w.shared_with_gender.push_back("gender_" + s);
        attribute("other_cell_" + s, cell[1 + k % 2][k % 2 == 0 ? 1 : 0], false, false);
        attribute("other_race_" + s, race[1 + k % 2], false, false);
        attribute("other_gender_" + s, gender[1], false, false);
        rows.emplace_back("random_" + s, gaussian(rng, dim, 1.0));
        w.pool.push_back("random_" + s);
        w.ibd_truth["random_" + s] = false;
        w.eibd_truth["random_" + s] = false;
    }
    w.table = make_table(rows);
    return w;
}

/// Bank around a static table: each stimulus gets `contexts` vectors equal to
/// its static vector plus N(0, sigma^2) noise per component.
inline EmbeddingBank noisy_bank(const EmbeddingTable& table, const std::vector<std::string>& words,
                                std::size_t contexts, double sigma, std::uint64_t seed,
                                std::string model_id = "synthetic") {
    std::mt19937_64 rng(seed);
    EmbeddingBank bank(table.dimension(), std::move(model_id));
    for (const auto& w : words) {
        const auto base = table.lookup(w);
        std::vector<float> values;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < contexts; ++i) {
            auto noise = gaussian(rng, base.size(), sigma);
            for (std::size_t d = 0; d < base.size(); ++d) values.push_back(base[d] + noise[d]);
            ids.push_back(w + "#" + std::to_string(i));
        }
        bank.set(w, std::move(ids), std::move(values));
    }
    return bank;
}

// Small random grid with random pool; used for property checks.
struct Fuzz {
    GroupGrid grid;
    EmbeddingTable table{1};
    std::vector<std::string> pool;
    std::string target;
};

inline Fuzz fuzz(std::mt19937_64& rng) {
    Fuzz f;
    const std::size_t m = 2 + rng() % 2, n = 2 + rng() % 2, dim = 4 + rng() % 12;
    f.grid.rows.name = "r";
    f.grid.cols.name = "c";
    for (std::size_t i = 0; i < m; ++i) f.grid.rows.labels.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) f.grid.cols.labels.push_back("c" + std::to_string(j));
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Cell c{"r" + std::to_string(i) + "c" + std::to_string(j), i, j, {}};
            const std::size_t k = 1 + rng() % 4;
            for (std::size_t q = 0; q < k; ++q) {
                c.names.push_back(c.id + "n" + std::to_string(q));
                rows.emplace_back(c.names.back(), gaussian(rng, dim, 1.0));
            }
            f.grid.cells.push_back(std::move(c));
        }
    const std::size_t words = 1 + rng() % 15;
    for (std::size_t q = 0; q < words; ++q) {
        f.pool.push_back("w" + std::to_string(q));
        rows.emplace_back(f.pool.back(), gaussian(rng, dim, 1.0));
    }
    f.table = make_table(rows);
    f.target = f.grid.cells[rng() % f.grid.cells.size()].id;
    return f;
}

}  // namespace biaslens::testing
