// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// non-zero when any criterion fails.

#include "biaslens/ceat.hpp"
#include "biaslens/detect.hpp"
#include "biaslens/error.hpp"
#include "biaslens/meta.hpp"
#include "biaslens/stimuli.hpp"
#include "biaslens/weat.hpp"
#include "support/fixtures.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace biaslens;
namespace bt = biaslens::testing;

namespace {

// Pinned tolerances.
constexpr double kPermutationTolerance = 0.02;
constexpr double kPermutationSeconds = 60.0;
constexpr std::size_t kPermutationDraws = 100'000;
constexpr double kMetaRelative = 1e-12;
constexpr double kCollapseAbsolute = 1e-12;
constexpr double kStabilityBound = 0.1;
constexpr double kScaleDrift = 1e-12;
constexpr double kGloveTolerancePoints = 2.0;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!pass) ++failures;
}

template <typename F>
void criterion(const std::string& name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(name, false, std::string("threw: ") + e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

// ---------------------------------------------------------------------------

void permutation_oracle() {
    criterion("permutation-oracle", [] {
        const auto start = std::chrono::steady_clock::now();
        std::mt19937_64 rng(10622);
        double worst = 0.0;
        bool exact_matches = true;
        for (int spec = 0; spec < 50; ++spec) {
            std::vector<std::vector<float>> vecs;
            for (int i = 0; i < 12; ++i) vecs.push_back(bt::gaussian(rng, 10, 1.0));
            ResolvedSpec r;
            for (int i = 0; i < 3; ++i) {
                r.x.emplace_back(vecs[i]);
                r.y.emplace_back(vecs[3 + i]);
                r.a.emplace_back(vecs[6 + i]);
                r.b.emplace_back(vecs[9 + i]);
            }
            const auto s = target_associations(r);
            // Independent enumeration of all 20 partitions.
            const double observed = (s[0] + s[1] + s[2]) - (s[3] + s[4] + s[5]);
            int exceed = 0, total = 0;
            for (unsigned mask = 0; mask < 64; ++mask) {
                if (std::popcount(mask) != 3) continue;
                ++total;
                double in = 0, out = 0;
                for (int i = 0; i < 6; ++i) ((mask >> i) & 1u ? in : out) += s[i];
                if (in - out > observed && mask != 0b000111u) ++exceed;
            }
            const double exact = double(exceed) / total;
            const auto lib_exact = permutation_pvalue(s, 3, ExactPermutation{});
            exact_matches = exact_matches && lib_exact.p_value == exact && lib_exact.count == 20 && total == 20;
            const auto mc = permutation_pvalue(s, 3, MonteCarloPermutation{kPermutationDraws, 1000u + spec});
            worst = std::max(worst, std::abs(mc.p_value - exact));
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report("permutation-oracle",
               worst <= kPermutationTolerance && secs < kPermutationSeconds && exact_matches,
               "50 specs, max |p_mc - p_exact| = " + fmt(worst) + " (<= " + fmt(kPermutationTolerance) +
                   "), exact enumeration agrees: " + (exact_matches ? "yes" : "no") + ", " + fmt(secs) + " s (< " +
                   fmt(kPermutationSeconds) + ")");
    });
}

// ---------------------------------------------------------------------------

void meta_oracle() {
    criterion("meta-oracle", [] {
        const std::vector<EffectObservation> obs{{0.2, 0.01}, {0.9, 0.02}, {1.4, 0.015}, {-0.3, 0.03}, {0.6, 0.012}};
        long double sw = 0, sw2 = 0, swe = 0, swe2 = 0;
        for (const auto& o : obs) {
            const long double w = 1.0L / o.variance;
            sw += w;
            sw2 += w * w;
            swe += w * o.effect_size;
            swe2 += w * o.effect_size * o.effect_size;
        }
        const long double q = swe2 - swe * swe / sw;
        const long double c = sw - sw2 / sw;
        const long double df = obs.size() - 1;
        const long double s2 = q >= df ? (q - df) / c : 0.0L;
        long double sv = 0, sve = 0;
        for (const auto& o : obs) {
            sv += 1.0L / (o.variance + s2);
            sve += o.effect_size / (o.variance + s2);
        }
        const long double ces = sve / sv, se = std::sqrt(1.0L / sv);
        const long double p = std::erfc(std::fabs(ces / se) / std::sqrt(2.0L));

        const auto r = combine(obs);
        double worst = 0;
        for (auto [got, want] : {std::pair{r.q_statistic, q}, {r.c_value, c}, {r.sigma2_between, s2},
                                 {r.ces, ces}, {r.se, se}, {r.p_combined, p}})
            worst = std::max(worst, double(std::fabs((got - want) / want)));

        const std::vector<EffectObservation> two{{0.5, 0.25}, {0.5, 0.25}};
        const auto t = combine(two);
        const bool worked = t.ces == 0.5 && t.se == std::sqrt(1.0 / 8.0) && t.sigma2_between == 0.0;
        report("meta-oracle", q > df && worst <= kMetaRelative && worked,
               "Q = " + fmt(double(q)) + " > N-1, max relative error " + fmt(worst) + " (<= 1e-12); two-sample CES " +
                   fmt(t.ces) + ", SE " + fmt(t.se) + (worked ? " exact" : " NOT exact"));
    });
}

// ---------------------------------------------------------------------------

void degenerate_collapse() {
    criterion("degenerate-bank-collapse", [] {
        std::mt19937_64 rng(7);
        const WeatSpec spec{"collapse", {"x1", "x2", "x3", "x4"}, {"y1", "y2", "y3", "y4"}, {"a1", "a2", "a3"},
                            {"b1", "b2", "b3"}};
        std::vector<std::pair<std::string, std::vector<float>>> rows;
        for (const auto& w : stimuli(spec)) rows.emplace_back(w, bt::gaussian(rng, 20, 1.0));
        const auto table = bt::make_table(rows);
        const auto bank = bt::noisy_bank(table, stimuli(spec), 1, 0.0, 7);
        const double es = weat(spec, table, ExactPermutation{}).effect_size;
        const auto r = run_ceat(bank, spec, 1000, kDefaultSeed);
        const double diff = std::abs(r.meta.ces - es);
        report("degenerate-bank-collapse", diff <= kCollapseAbsolute && r.meta.sigma2_between == 0.0,
               "N = 1000, |CES - ES| = " + fmt(diff) + " (<= 1e-12), sigma2_between = " + fmt(r.meta.sigma2_between));
    });
}

// ---------------------------------------------------------------------------

void stability() {
    criterion("ceat-stability", [] {
        const std::size_t dim = 50, per_set = 8, contexts = 2000;
        const double sigma = 0.1;
        double worst = 0;
        std::string detail;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            // Planted static table: X and A share +u, Y and B share -u.
            std::mt19937_64 rng(seed);
            const auto u = bt::direction(rng, dim);
            WeatSpec spec{"stability", {}, {}, {}, {}};
            std::vector<std::pair<std::string, std::vector<float>>> rows;
            auto make = [&](std::vector<std::string>& set, const std::string& prefix, double sign) {
                for (std::size_t i = 0; i < per_set; ++i) {
                    set.push_back(prefix + std::to_string(i));
                    rows.emplace_back(set.back(), bt::add(bt::direction(rng, dim), u, 0.15 * sign));
                }
            };
            make(spec.x, "x", 1);
            make(spec.y, "y", -1);
            make(spec.a, "a", 1);
            make(spec.b, "b", -1);
            const auto table = bt::make_table(rows);
            const auto bank = bt::noisy_bank(table, stimuli(spec), contexts, sigma, 100 + seed);
            CeatOptions opts;
            opts.workers = 1;
            const auto small = run_ceat(bank, spec, 1000, seed, default_sample_pvalue_mode(seed), opts);
            const auto large = run_ceat(bank, spec, 10000, seed, default_sample_pvalue_mode(seed), opts);
            const double d = std::abs(small.meta.ces - large.meta.ces);
            worst = std::max(worst, d);
            if (seed == 1) detail = "seed 1: CES(1000) = " + fmt(small.meta.ces) + ", CES(10000) = " + fmt(large.meta.ces);
        }
        report("ceat-stability", worst < kStabilityBound,
               "10 seeds, max |CES(N=1000) - CES(N=10000)| = " + fmt(worst) + " (< 0.1); " + detail);
    });
}

// ---------------------------------------------------------------------------

bool subset(const std::vector<std::string>& small, const std::vector<std::string>& big) {
    const std::set<std::string> b(big.begin(), big.end());
    return std::all_of(small.begin(), small.end(), [&](const auto& w) { return b.contains(w); });
}

void planted_detection() {
    criterion("planted-detection", [] {
        std::string acc;
        bool ok = true;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto w = bt::planted_world(seed);
            const DetectionConfig cfg{"C00", w.pool, 0.0, EibdRemoval::any_constituent};
            const auto ib = detect_intersectional_auto(w.grid, cfg, w.table, w.ibd_truth);
            const auto eib = detect_emergent_auto(w.grid, cfg, w.table, w.eibd_truth);
            ok = ok && ib.confusion->accuracy == 1.0 && eib.confusion->accuracy == 1.0;
            acc += " " + fmt(ib.confusion->accuracy) + "/" + fmt(eib.confusion->accuracy);
        }
        report("planted-detection", ok, "IBD/EIBD accuracy over 5 planted tables:" + acc);
    });
    criterion("detection-set-relations", [] {
        std::mt19937_64 rng(10622);
        std::normal_distribution<double> nd(0.5, 1.0);
        std::size_t violations = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const bt::Fuzz f = bt::fuzz(rng);
            const ScoreMatrix m(f.grid, f.target, f.pool, f.table);
            const double t = nd(rng);
            const auto ib = m.intersectional_set(t);
            const auto any = m.emergent_set(t, EibdRemoval::any_constituent);
            const auto all = m.emergent_set(t, EibdRemoval::all_constituents);
            if (!subset(ib, f.pool) || !subset(any, ib) || !subset(all, ib) || !subset(any, all)) ++violations;
        }
        report("detection-set-relations", violations == 0,
               "1000 fuzzed configurations, W_EIB (both modes) within W_IB within pool; violations: " +
                   std::to_string(violations));
    });
}

// ---------------------------------------------------------------------------

void invariance() {
    criterion("invariance-antisymmetry", [] {
        std::mt19937_64 rng(11);
        std::size_t bad = 0;
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 2 + trial % 6, k = 2 + trial % 5, dim = 5 + trial % 20;
            WeatSpec spec{"t", {}, {}, {}, {}};
            std::vector<std::pair<std::string, std::vector<float>>> rows;
            auto make = [&](std::vector<std::string>& set, const std::string& prefix, std::size_t count) {
                for (std::size_t i = 0; i < count; ++i) {
                    set.push_back(prefix + std::to_string(i));
                    rows.emplace_back(set.back(), bt::gaussian(rng, dim, 1.0));
                }
            };
            make(spec.x, "x", n);
            make(spec.y, "y", n);
            make(spec.a, "a", k);
            make(spec.b, "b", k);
            const auto table = bt::make_table(rows);
            const double es = effect_size(spec, table);
            WeatSpec xy = spec, ab = spec;
            std::swap(xy.x, xy.y);
            std::swap(ab.a, ab.b);
            if (effect_size(xy, table) != -es || effect_size(ab, table) != -es) ++bad;
        }
        report("invariance-antisymmetry", bad == 0,
               "200 random specs, X<->Y and A<->B swaps negate ES exactly; mismatches: " + std::to_string(bad));
    });
    criterion("invariance-scale", [] {
        std::mt19937_64 rng(12);
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            WeatSpec spec{"t", {"x0", "x1", "x2"}, {"y0", "y1", "y2"}, {"a0", "a1", "a2"}, {"b0", "b1", "b2"}};
            std::vector<std::pair<std::string, std::vector<float>>> rows;
            for (const auto& w : stimuli(spec)) {
                // 1/64 grid: scaled copies below stay exactly representable in float32.
                auto v = bt::gaussian(rng, 12, 1.0);
                for (auto& x : v) x = std::round(x * 64.0f) / 64.0f;
                rows.emplace_back(w, v);
            }
            const auto base = bt::make_table(rows);
            const auto words = stimuli(spec);
            const std::string target = words[trial % words.size()];
            const double es0 = effect_size(spec, base), ts0 = test_statistic(spec, base);
            const double da0 = diff_assoc("x0", spec.a, spec.b, base), sa0 = std_assoc("x0", spec.a, spec.b, base);
            for (float lambda : {3.0f, 0.375f, 5.5f, 7.0f, 1024.0f}) {
                auto scaled_rows = rows;
                for (auto& [w, v] : scaled_rows)
                    if (w == target)
                        for (auto& x : v) x *= lambda;
                const auto t = bt::make_table(scaled_rows);
                worst = std::max({worst, std::abs(effect_size(spec, t) - es0), std::abs(test_statistic(spec, t) - ts0),
                                  std::abs(diff_assoc("x0", spec.a, spec.b, t) - da0),
                                  std::abs(std_assoc("x0", spec.a, spec.b, t) - sa0)});
            }
        }
        report("invariance-scale", worst <= kScaleDrift,
               "100 specs x 5 scale factors on one word, max drift of diff_assoc/std_assoc/statistic/ES = " +
                   fmt(worst) + " (<= 1e-12)");
    });
    criterion("invariance-workers", [] {
        std::mt19937_64 rng(13);
        const WeatSpec spec{"w", {"x1", "x2", "x3"}, {"y1", "y2", "y3"}, {"a1", "a2", "a3"}, {"b1", "b2", "b3"}};
        std::vector<std::pair<std::string, std::vector<float>>> rows;
        for (const auto& w : stimuli(spec)) rows.emplace_back(w, bt::gaussian(rng, 30, 1.0));
        const auto bank = bt::noisy_bank(bt::make_table(rows), stimuli(spec), 500, 0.3, 13);
        CeatOptions one, eight;
        one.workers = 1;
        eight.workers = 8;
        const auto a = run_ceat(bank, spec, 2000, 5, default_sample_pvalue_mode(5), one);
        const auto b = run_ceat(bank, spec, 2000, 5, default_sample_pvalue_mode(5), eight);
        bool same = a.samples.size() == b.samples.size();
        for (std::size_t i = 0; same && i < a.samples.size(); ++i) {
            const auto &s = a.samples[i], &t = b.samples[i];
            same = bit_equal(s.effect_size, t.effect_size) && bit_equal(s.variance, t.variance) &&
                   bit_equal(s.p_value, t.p_value) && s.draw_record == t.draw_record && s.sample_index == t.sample_index;
        }
        same = same && bit_equal(a.meta.ces, b.meta.ces) && bit_equal(a.meta.se, b.meta.se) &&
               bit_equal(a.meta.sigma2_between, b.meta.sigma2_between) &&
               bit_equal(a.meta.q_statistic, b.meta.q_statistic) && bit_equal(a.meta.p_combined, b.meta.p_combined) &&
               a.meta.re_weights == b.meta.re_weights;
        report("invariance-workers", same, "N = 2000, 1 vs 8 workers: " + std::string(same ? "bit-identical" : "DIFFER"));
    });
}

// ---------------------------------------------------------------------------

void glove_reproduction() {
    const char* path = std::getenv("BIASLENS_GLOVE");
    if (!path || !*path) {
        std::cout << "SKIP glove-validation: set BIASLENS_GLOVE to the 840B-token GloVe text file to run" << std::endl;
        return;
    }
    criterion("glove-validation", [&] {
        const auto start = std::chrono::steady_clock::now();
        const auto& vs = validation_set();
        const auto& grid0 = builtin_grid();
        std::set<std::string, std::less<>> wanted;
        for (const auto& w : vs.pool()) wanted.insert(w);
        for (const auto& c : grid0.cells) wanted.insert(c.names.begin(), c.names.end());
        const auto table = load_swe(path, wanted);

        GroupGrid grid = grid0;
        for (auto& c : grid.cells)
            std::erase_if(c.names, [&](const std::string& n) { return !table.contains(n); });
        std::vector<std::string> pool;
        for (const auto& w : vs.pool())
            if (table.contains(w)) pool.push_back(w);

        struct Case {
            const char* cell;
            bool emergent;
            double expected;
        };
        bool ok = true;
        std::string detail = std::to_string(pool.size()) + "/98 attributes present;";
        for (const Case c : {Case{"AF", false, 81.6}, Case{"MF", false, 82.7}, Case{"AF", true, 84.7},
                             Case{"MF", true, 65.3}}) {
            const auto full = vs.labels_for(c.emergent ? emergent_group_label(c.cell) : intersectional_group_label(c.cell));
            Labels labels;
            for (const auto& w : pool) labels.emplace(w, full.at(w));
            const DetectionConfig cfg{c.cell, pool, 0.0, EibdRemoval::any_constituent};
            const auto r = c.emergent ? detect_emergent_auto(grid, cfg, table, labels)
                                      : detect_intersectional_auto(grid, cfg, table, labels);
            const double acc = 100.0 * r.confusion->accuracy;
            ok = ok && std::abs(acc - c.expected) <= kGloveTolerancePoints;
            detail += std::string(" ") + (c.emergent ? "EIBD " : "IBD ") + c.cell + " " + fmt(acc) + "% (want " +
                      fmt(c.expected) + " +/- 2)";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report("glove-validation", ok && secs < 600.0, detail + "; " + fmt(secs) + " s");
    });
}

}  // namespace

int main() {
    permutation_oracle();
    meta_oracle();
    degenerate_collapse();
    stability();
    planted_detection();
    invariance();
    glove_reproduction();
    std::cout << (failures ? "FAILED: " + std::to_string(failures) + " criteria" : std::string("ALL PASSED"))
              << std::endl;
    return failures ? 1 : 0;
}
