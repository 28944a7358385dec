#include "biaslens/cli.hpp"

#include "biaslens/ceat.hpp"
#include "biaslens/detect.hpp"
#include "biaslens/embed_store.hpp"
#include "biaslens/error.hpp"
#include "biaslens/report.hpp"
#include "biaslens/run_manifest.hpp"
#include "biaslens/stimuli.hpp"
#include "biaslens/weat.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#ifndef BIASLENS_VERSION
#define BIASLENS_VERSION "0.0.0"
#endif

namespace biaslens {

namespace fs = std::filesystem;
using WordSet = std::set<std::string, std::less<>>;

namespace {

struct CommonOptions {
    std::uint64_t seed = kDefaultSeed;
    std::string format = "json";
    std::string out;
    std::string manifest;
    std::string oov = "error";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
    cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv", "svg"}))
        ->capture_default_str();
    cmd->add_option("--out", o.out, "Write the primary output here instead of stdout");
    cmd->add_option("--manifest", o.manifest, "Run manifest path (default: <out>.manifest.json, or stderr)");
    cmd->add_option("--oov", o.oov, "Missing-word policy")->check(CLI::IsMember({"error", "skip"}))
        ->capture_default_str();
}

OovPolicy policy(const CommonOptions& o) { return o.oov == "skip" ? OovPolicy::skip_with_warning : OovPolicy::error; }

class Session {
public:
    Session(std::vector<std::string> args, std::ostream& out, std::ostream& err)
        : out_(out), err_(err) {
        manifest_.command_line = std::move(args);
        manifest_.tool_version = BIASLENS_VERSION;
    }

    RunManifest& manifest() { return manifest_; }
    std::ostream& err() { return err_; }

    void digest(const std::string& path) { manifest_.input_digests[path] = content_digest(path); }

    void warn(std::string_view category, const std::string& message) {
        err_ << "W:" << category << ":" << message << '\n';
    }

    void emit(const CommonOptions& o, const std::string& payload) {
        manifest_.seed = o.seed;
        manifest_.timestamp = utc_timestamp();
        if (o.out.empty()) {
            out_ << payload;
        } else {
            write_file(o.out, payload);
        }
        const std::string manifest_text = manifest_.to_json().dump(2) + "\n";
        if (!o.manifest.empty())
            write_file(o.manifest, manifest_text);
        else if (!o.out.empty())
            write_file(o.out + ".manifest.json", manifest_text);
        else
            err_ << "I:manifest:" << manifest_.to_json().dump() << '\n';
    }

    static void write_file(const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorCategory::io, "cannot write " + path);
        f << text;
        if (!f) throw Error(ErrorCategory::io, "write failure on " + path);
    }

private:
    std::ostream& out_;
    std::ostream& err_;
    RunManifest manifest_;
};

WeatSpec resolve_spec(const std::string& arg, Session& s) {
    constexpr std::string_view prefix = "builtin:";
    if (arg.starts_with(prefix)) return builtin_test(parse_builtin_test(std::string_view(arg).substr(prefix.size())));
    s.digest(arg);
    return load_spec(arg);
}

PValueMode pvalue_mode(bool exact, std::optional<std::size_t> mc, std::uint64_t seed, PValueMode fallback) {
    if (exact) return ExactPermutation{};
    if (mc) {
        if (*mc == 0) throw Error(ErrorCategory::parameter, "--mc needs a positive count");
        return MonteCarloPermutation{*mc, seed};
    }
    return fallback;
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) out += (out.empty() ? "" : ", ") + w;
    return out;
}

WeatSpec apply_oov(const WeatSpec& spec, const std::function<bool(const std::string&)>& available,
                   const CommonOptions& o, Session& s, nlohmann::ordered_json& notes) {
    if (policy(o) == OovPolicy::error) return spec;
    PrunedSpec pruned = prune_and_balance(spec, available, o.seed);
    if (!pruned.missing.empty()) s.warn("missing-word", "skipped " + join(pruned.missing));
    if (!pruned.balanced_out.empty()) s.warn("balance", "dropped to equalize set sizes: " + join(pruned.balanced_out));
    notes["missing"] = pruned.missing;
    notes["balanced_out"] = pruned.balanced_out;
    validate(pruned.spec);
    return pruned.spec;
}

// ---------------------------------------------------------------------------

struct WeatArgs {
    CommonOptions common;
    std::string swe;
    std::string spec;
    bool exact = false;
    std::optional<std::size_t> mc;
};

int run_weat(const WeatArgs& a, Session& s) {
    WeatSpec spec = resolve_spec(a.spec, s);
    s.digest(a.swe);
    const auto words = stimuli(spec);
    const EmbeddingTable table = load_swe(a.swe, WordSet(words.begin(), words.end()));
    nlohmann::ordered_json notes = nlohmann::ordered_json::object();
    spec = apply_oov(spec, [&](const std::string& w) { return table.contains(w); }, a.common, s, notes);

    const PValueMode mode = pvalue_mode(a.exact, a.mc, a.common.seed, AutoPermutation{a.common.seed});
    const WeatOutcome outcome = weat(spec, table, mode);
    const Format format = parse_format(a.common.format);
    std::string payload;
    if (format == Format::json) {
        auto j = to_json(outcome, spec.label);
        if (!notes.empty()) j["oov"] = notes;
        payload = j.dump(2) + "\n";
    } else {
        payload = render(outcome, spec.label, format);
    }
    s.emit(a.common, payload);
    return kExitOk;
}

struct CeatArgs {
    CommonOptions common;
    std::string bank;
    std::string spec;
    std::size_t samples = kDefaultCeatSamples;
    std::size_t bins = kDefaultHistogramBins;
    std::size_t workers = 0;
    bool exact = false;
    std::optional<std::size_t> mc;
    bool compact = false;
    std::string allow_list;
};

int run_ceat_cmd(const CeatArgs& a, Session& s) {
    WeatSpec spec = resolve_spec(a.spec, s);
    s.digest(a.bank);
    const EmbeddingBank bank = load_bank(a.bank);
    nlohmann::ordered_json notes = nlohmann::ordered_json::object();
    spec = apply_oov(spec, [&](const std::string& w) { return bank.contains(w); }, a.common, s, notes);

    CeatOptions options;
    options.workers = a.workers ? a.workers : std::max(1u, std::thread::hardware_concurrency());
    if (!a.allow_list.empty()) {
        s.digest(a.allow_list);
        std::ifstream in(a.allow_list);
        if (!in) throw Error(ErrorCategory::io, "cannot open " + a.allow_list);
        WordSet ids;
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) ids.insert(line);
        options.sentence_allow_list = std::move(ids);
    }
    if (a.samples < 1) throw Error(ErrorCategory::parameter, "--samples must be at least 1");
    if (a.bins < 1) throw Error(ErrorCategory::parameter, "--hist must be at least 1");
    s.manifest().samples = a.samples;

    const PValueMode mode = pvalue_mode(a.exact, a.mc, a.common.seed, default_sample_pvalue_mode(a.common.seed));
    const CeatResult result = run_ceat(bank, spec, a.samples, a.common.seed, mode, options);
    s.err() << "I:ceat:" << result.spec_label << " CES=" << format_number(result.meta.ces)
            << " p=" << format_p_human(result.meta.p_combined) << " N=" << result.sample_count << '\n';

    const Format format = parse_format(a.common.format);
    const RenderOptions ro{a.bins, a.compact};
    std::string payload;
    if (format == Format::json) {
        auto j = to_json(result, ro);
        if (!notes.empty()) j["oov"] = notes;
        payload = j.dump(2) + "\n";
    } else {
        payload = render(result, format, ro);
    }
    s.emit(a.common, payload);
    return kExitOk;
}

struct DetectArgs {
    CommonOptions common;
    std::string swe;
    std::string grid;
    std::string target;
    std::string pool;
    std::optional<double> threshold;
    bool auto_roc = false;
    std::string removal = "any";
    std::string roc_out;
};

int run_detect(const DetectArgs& a, bool emergent, Session& s) {
    GroupGrid grid;
    if (!a.grid.empty()) {
        s.digest(a.grid);
        grid = load_grid(a.grid);
    } else if (const fs::path bundled = data_dir() / "v1" / "grid.json"; fs::exists(bundled)) {
        s.digest(bundled.string());
        grid = load_grid(bundled);
    } else {
        grid = builtin_grid();
    }
    grid.cell(a.target);

    std::vector<std::string> candidates;
    std::optional<Labels> labels;
    if (!a.pool.empty()) {
        s.digest(a.pool);
        CandidatePool pool = load_pool(a.pool);
        candidates = std::move(pool.candidates);
        labels = emergent ? pool.eibd_labels : pool.ibd_labels;
    } else {
        const ValidationDataset& v = validation_set();
        candidates = v.pool();
        const GroupGrid& builtin = builtin_grid();
        bool known = false;
        for (const Cell& c : builtin.cells) known = known || c.id == a.target;
        if (known)
            labels = v.labels_for(emergent ? emergent_group_label(a.target) : intersectional_group_label(a.target));
    }

    WordSet wanted(candidates.begin(), candidates.end());
    for (const Cell& c : grid.cells) wanted.insert(c.names.begin(), c.names.end());
    s.digest(a.swe);
    const EmbeddingTable table = load_swe(a.swe, wanted);

    if (policy(a.common) == OovPolicy::skip_with_warning) {
        std::vector<std::string> missing;
        auto keep = [&](std::vector<std::string>& words) {
            std::vector<std::string> kept;
            for (auto& w : words) (table.contains(w) ? kept : missing).push_back(w);
            words = std::move(kept);
        };
        keep(candidates);
        for (Cell& c : grid.cells) keep(c.names);
        if (!missing.empty()) s.warn("missing-word", "skipped " + join(missing));
        if (labels) {
            Labels kept;
            for (const auto& w : candidates) kept.emplace(w, labels->at(w));
            labels = std::move(kept);
        }
    }

    DetectionConfig cfg;
    cfg.target_cell = a.target;
    cfg.candidate_pool = candidates;
    cfg.removal = parse_removal(a.removal);

    DetectionResult result;
    if (a.auto_roc) {
        if (!labels) throw Error(ErrorCategory::parameter, "--auto-roc needs labeled candidates (--pool with positives)");
        result = emergent ? detect_emergent_auto(grid, cfg, table, *labels)
                          : detect_intersectional_auto(grid, cfg, table, *labels);
    } else {
        cfg.threshold = *a.threshold;
        result = emergent ? detect_emergent(grid, cfg, table, labels) : detect_intersectional(grid, cfg, table, labels);
    }
    if (result.confusion)
        s.err() << "I:" << (emergent ? "eibd" : "ibd") << ":" << a.target << " threshold=" <<
            format_number(result.threshold_used) << " accuracy=" << format_number(result.confusion->accuracy) << '\n';
    if (!a.roc_out.empty()) {
        if (!result.roc) throw Error(ErrorCategory::parameter, "--roc-out needs --auto-roc");
        Session::write_file(a.roc_out, render(*result.roc, Format::csv));
    }
    s.emit(a.common, render(result, parse_format(a.common.format)));
    return kExitOk;
}

int run_bank_info(const std::string& dir, std::ostream& out) {
    const EmbeddingBank bank = load_bank(dir);
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    std::size_t total = 0;
    for (const auto& [w, e] : bank.stimuli()) {
        counts[w] = e.count();
        total += e.count();
    }
    nlohmann::ordered_json j = {{"format_version", kBankFormatVersion},
                                {"model_id", bank.model_id()},
                                {"dimension", bank.dimension()},
                                {"stimulus_count", bank.stimuli().size()},
                                {"vector_count", total},
                                {"stimuli", counts}};
    out << j.dump(2) << '\n';
    return kExitOk;
}

int exit_code(ErrorCategory c) { return c == ErrorCategory::parameter ? kExitUsage : kExitData; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"biaslens: association-test bias measurement for word embeddings", "biaslens"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BIASLENS_VERSION);

    WeatArgs weat_args;
    auto* weat_cmd = app.add_subcommand("weat", "Effect size and permutation p-value on static embeddings");
    add_common(weat_cmd, weat_args.common);
    weat_cmd->add_option("--swe", weat_args.swe, "GloVe-format embedding file")->required();
    weat_cmd->add_option("--spec", weat_args.spec, "Spec JSON file or builtin:I1..I4")->required();
    auto* exact_flag = weat_cmd->add_flag("--exact", weat_args.exact, "Enumerate every partition");
    weat_cmd->add_option("--mc", weat_args.mc, "Monte Carlo permutation count")->excludes(exact_flag);

    CeatArgs ceat_args;
    auto* ceat_cmd = app.add_subcommand("ceat", "Sampled effect sizes over a contextualized embedding bank");
    add_common(ceat_cmd, ceat_args.common);
    ceat_cmd->add_option("--bank", ceat_args.bank, "Embedding bank directory")->required();
    ceat_cmd->add_option("--spec", ceat_args.spec, "Spec JSON file or builtin:I1..I4")->required();
    ceat_cmd->add_option("--samples", ceat_args.samples, "Number of samples N")->capture_default_str();
    ceat_cmd->add_option("--hist", ceat_args.bins, "Histogram bins")->capture_default_str();
    ceat_cmd->add_option("--workers", ceat_args.workers, "Worker threads (0 = hardware concurrency)");
    auto* ceat_exact = ceat_cmd->add_flag("--exact", ceat_args.exact, "Exact per-sample p-values");
    ceat_cmd->add_option("--mc", ceat_args.mc, "Per-sample Monte Carlo permutations (default 1000)")
        ->excludes(ceat_exact);
    ceat_cmd->add_flag("--compact", ceat_args.compact, "Omit per-sample draw records");
    ceat_cmd->add_option("--allow-list", ceat_args.allow_list, "File of sentence ids draws are restricted to");

    DetectArgs ibd_args, eibd_args;
    auto add_detect = [](CLI::App* cmd, DetectArgs& d, bool emergent) {
        add_common(cmd, d.common);
        cmd->add_option("--swe", d.swe, "GloVe-format embedding file")->required();
        cmd->add_option("--grid", d.grid, "Group grid JSON (default: bundled race x gender grid)");
        cmd->add_option("--target", d.target, "Target cell id, e.g. AF")->required();
        cmd->add_option("--pool", d.pool, "Candidate pool JSON (default: bundled validation set)");
        auto* t = cmd->add_option("--threshold", d.threshold, "Fixed detection threshold");
        auto* r = cmd->add_flag("--auto-roc", d.auto_roc, "Select the threshold maximizing TPR - FPR");
        t->excludes(r);
        cmd->add_option("--roc-out", d.roc_out, "Write the ROC table (CSV) here");
        if (emergent)
            cmd->add_option("--removal", d.removal, "Constituent removal rule")
                ->check(CLI::IsMember({"any", "all"}))
                ->capture_default_str();
    };
    auto* ibd_cmd = app.add_subcommand("ibd", "Intersectional bias detection");
    add_detect(ibd_cmd, ibd_args, false);
    auto* eibd_cmd = app.add_subcommand("eibd", "Emergent intersectional bias detection");
    add_detect(eibd_cmd, eibd_args, true);

    std::string bank_dir;
    auto* info_cmd = app.add_subcommand("bank-info", "Validate and summarize an embedding bank");
    info_cmd->add_option("dir", bank_dir, "Bank directory")->required();

    std::vector<std::string> argv_storage{"biaslens"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);  // --help / --version
            return kExitOk;
        }
        err << "E:usage:" << e.what() << "\nRun with --help for more information.\n";
        return kExitUsage;
    }

    for (auto* d : {&ibd_args, &eibd_args}) {
        auto* cmd = d == &ibd_args ? ibd_cmd : eibd_cmd;
        if (cmd->parsed() && !d->auto_roc && !d->threshold) {
            err << "E:usage:one of --threshold or --auto-roc is required\n";
            return kExitUsage;
        }
    }

    Session session(args, out, err);
    try {
        if (weat_cmd->parsed()) return run_weat(weat_args, session);
        if (ceat_cmd->parsed()) return run_ceat_cmd(ceat_args, session);
        if (ibd_cmd->parsed()) return run_detect(ibd_args, false, session);
        if (eibd_cmd->parsed()) return run_detect(eibd_args, true, session);
        if (info_cmd->parsed()) return run_bank_info(bank_dir, out);
    } catch (const Error& e) {
        err << "E:" << category_name(e.category()) << ":" << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        err << "E:internal:" << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace biaslens
