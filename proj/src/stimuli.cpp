#include "biaslens/stimuli.hpp"

#include "biaslens/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#ifndef BIASLENS_DEFAULT_DATA_DIR
#define BIASLENS_DEFAULT_DATA_DIR "data"
#endif

namespace biaslens {

namespace {

using Words = std::vector<std::string>;

const Words kAfricanAmericanFemales{"Aisha",  "Keisha", "Lakisha", "Latisha", "Latoya",  "Malika",
                                    "Nichelle", "Shereen", "Tamika", "Tanisha", "Yolanda", "Yvette"};
const Words kAfricanAmericanMales{"Alonzo", "Alphonse",  "Hakim",    "Jamal",  "Jamel",  "Jerome",
                                  "Leroy",  "Lionel", "Marcellus", "Terrence", "Tyrone", "Wardell"};
const Words kEuropeanAmericanFemales{"Carrie", "Colleen", "Ellen",   "Emily",  "Heather", "Katie",
                                     "Megan",  "Melanie", "Nancy", "Rachel", "Sarah",   "Stephanie"};
const Words kEuropeanAmericanMales{"Andrew",   "Brad",   "Frank", "Geoffrey", "Jack",  "Jonathan",
                                   "Josh", "Matthew", "Neil",  "Peter",    "Roger", "Stephen"};
const Words kMexicanAmericanFemales{"Adriana", "Alejandra", "Alma",   "Brenda", "Carolina", "Iliana",
                                    "Karina",  "Liset",     "Maria", "Mayra",  "Sonia",    "Yesenia"};
// UTF-8, NFC.
const Words kMexicanAmericanMales{"Alberto", "Alejandro", "Alfredo", "Antonio", "César",     "Jesús",
                                  "José", "Juan",     "Miguel",  "Pedro",   "Rigoberto", "Rogelio"};

ValidationDataset make_validation() {
    ValidationDataset d;
    d.groups = {
        {"Biases of Females", 13.3,
         {"attractive", "caring", "dependent", "emotional", "feminine", "jealous", "manipulative", "materialistic",
          "motherly", "petite", "soft", "submissive", "talkative"}},
        {"Biases of Males", 13.3,
         {"aggressive", "ambitious", "arrogant", "fixer-upper", "high-status", "intelligent", "leader", "messy",
          "provider", "respected", "sexist", "tall", "unfaithful"}},
        {"Biases of African Americans", 12.2,
         {"athletic", "criminals", "dangerous", "gangsters", "ghetto", "lazy", "loud", "poor", "tall", "uneducated",
          "unrefined", "violent"}},
        {"Emergent Intersectional Biases of African American Females", 9.2,
         {"aggressive", "assertive", "bigbutt", "confident", "darkskinned", "fried-chicken", "overweight",
          "promiscuous", "unfeminine"}},
        {"Intersectional Biases of African American Females", 14.3,
         {"aggressive", "assertive", "athletic", "bigbutt", "confident", "darkskinned", "fried-chicken", "ghetto",
          "loud", "overweight", "promiscuous", "unfeminine", "unintelligent", "unrefined"}},
        {"Emergent Intersectional Biases of African American Males", 3.1, {"darkskinned", "hypersexual", "rapper"}},
        {"Intersectional Biases of African American Males", 13.3,
         {"athletic", "criminals", "dangerous", "darkskinned", "gangsters", "hypersexual", "lazy", "loud", "poor",
          "rapper", "tall", "unintelligent", "violent"}},
        {"Biases of European Americans", 15.3,
         {"all-American", "arrogant", "attractive", "blond", "blue-eyes", "high-status", "ignorant", "intelligent",
          "overweight", "patronizing", "privileged", "racist", "red-neck", "rich", "tall"}},
        {"Emergent Intersectional Biases of European American Females", 1.0, {"ditsy"}},
        {"Intersectional Biases of European American Females", 14.3,
         {"arrogant", "attractive", "blond", "ditsy", "emotional", "feminine", "high-status", "intelligent",
          "materialistic", "petite", "racist", "rich", "submissive", "tall"}},
        {"Emergent Intersectional Biases of European American Males", 3.1, {"assertive", "educated", "successful"}},
        {"Intersectional Biases of European American Males", 15.3,
         {"all-American", "arrogant", "assertive", "attractive", "blond", "educated", "high-status", "intelligent",
          "leader", "privileged", "racist", "rich", "sexist", "successful", "tall"}},
        {"Biases of Mexican Americans", 14.3,
         {"darkskinned", "day-laborer", "family-oriented", "gangster", "hardworker", "illegal-immigrant", "lazy",
          "loud", "macho", "overweight", "poor", "short", "uneducated", "unintelligent"}},
        {"Emergent Intersectional Biases of Mexican American Females", 6.1,
         {"cook", "curvy", "feisty", "maids", "promiscuous", "sexy"}},
        {"Intersectional Biases of Mexican American Females", 13.3,
         {"attractive", "cook", "curvy", "darkskinned", "feisty", "hardworker", "loud", "maids", "promiscuous", "sexy",
          "short", "uneducated", "unintelligent"}},
        {"Emergent Intersectional Biases of Mexican American Males", 4.1,
         {"drunks", "jealous", "promiscuous", "violent"}},
        {"Intersectional Biases of Mexican American Males", 15.3,
         {"aggressive", "arrogant", "darkskinned", "day-laborer", "drunks", "hardworker", "illegal-immigrant",
          "jealous", "macho", "poor", "promiscuous", "short", "uneducated", "unintelligent", "violent"}},
        {"Random (Insects)", 25.5,
         {"ant",       "bedbug", "bee",   "beetle",   "blackfly", "caterpillar", "centipede", "cockroach", "cricket",
          "dragonfly", "flea",   "fly",   "gnat",     "hornet",   "horsefly",    "locust",    "maggot",    "mosquito",
          "moth",      "roach",  "spider", "tarantula", "termite", "wasp",       "weevil"}},
    };
    return d;
}

GroupGrid make_grid() {
    GroupGrid g;
    g.rows = {"race", {"African American", "European American", "Mexican American"}};
    g.cols = {"gender", {"female", "male"}};
    g.cells = {
        {"AF", 0, 0, kAfricanAmericanFemales}, {"AM", 0, 1, kAfricanAmericanMales},
        {"EF", 1, 0, kEuropeanAmericanFemales}, {"EM", 1, 1, kEuropeanAmericanMales},
        {"MF", 2, 0, kMexicanAmericanFemales}, {"MM", 2, 1, kMexicanAmericanMales},
    };
    return g;
}

std::string cell_phrase(std::string_view cell_id) {
    const GroupGrid& g = builtin_grid();
    const Cell& c = g.cell(cell_id);
    std::string gender = g.cols.labels[c.col] == "female" ? "Females" : "Males";
    return g.rows.labels[c.row] + " " + gender;
}

}  // namespace

BuiltinTest parse_builtin_test(std::string_view id) {
    if (id == "I1") return BuiltinTest::I1;
    if (id == "I2") return BuiltinTest::I2;
    if (id == "I3") return BuiltinTest::I3;
    if (id == "I4") return BuiltinTest::I4;
    throw Error(ErrorCategory::validation, "unknown built-in test \"" + std::string(id) + "\" (expected I1..I4)");
}

std::string_view builtin_test_id(BuiltinTest test) {
    switch (test) {
        case BuiltinTest::I1: return "I1";
        case BuiltinTest::I2: return "I2";
        case BuiltinTest::I3: return "I3";
        case BuiltinTest::I4: return "I4";
    }
    return "?";
}

WeatSpec builtin_test(BuiltinTest test) {
    switch (test) {
        case BuiltinTest::I1:
            return {"I1", kAfricanAmericanFemales, kEuropeanAmericanMales,
                    {"aggressive", "athletic", "bigbutt", "confident", "darkskinned", "fried-chicken", "ghetto", "loud",
                     "overweight", "promiscuous", "unfeminine", "unintelligent", "unrefined"},
                    {"all-American", "arrogant", "attractive", "blond", "high-status", "intelligent", "leader",
                     "privileged", "racist", "rich", "sexist", "successful", "tall"}};
        case BuiltinTest::I2:
            return {"I2", kAfricanAmericanFemales, kEuropeanAmericanMales,
                    {"aggressive", "bigbutt", "confident", "darkskinned", "fried-chicken", "overweight", "promiscuous",
                     "unfeminine"},
                    {"arrogant", "blond", "high-status", "intelligent", "racist", "rich", "successful", "tall"}};
        case BuiltinTest::I3:
            return {"I3", kMexicanAmericanFemales, kEuropeanAmericanMales,
                    {"cook", "curvy", "darkskinned", "feisty", "hardworker", "loud", "maids", "promiscuous", "sexy",
                     "short", "uneducated", "unintelligent"},
                    {"all-American", "arrogant", "blond", "high-status", "intelligent", "leader", "privileged",
                     "racist", "rich", "sexist", "successful", "tall"}};
        case BuiltinTest::I4:
            return {"I4", kMexicanAmericanFemales, kEuropeanAmericanMales,
                    {"cook", "curvy", "feisty", "maids", "promiscuous", "sexy"},
                    {"arrogant", "assertive", "intelligent", "rich", "successful", "tall"}};
    }
    throw Error(ErrorCategory::validation, "unknown built-in test");
}

std::vector<std::string> builtin_exclusions(BuiltinTest test) {
    switch (test) {
        case BuiltinTest::I1:
        case BuiltinTest::I2: return {"assertive"};
        case BuiltinTest::I3: return {"attractive"};
        case BuiltinTest::I4: return {};
    }
    return {};
}

const ValidationGroup& ValidationDataset::group(std::string_view label) const {
    for (const auto& g : groups)
        if (g.label == label) return g;
    throw Error(ErrorCategory::validation, "no validation group \"" + std::string(label) + "\"");
}

std::vector<std::string> ValidationDataset::pool() const {
    std::vector<std::string> out;
    std::set<std::string_view> seen;
    for (const auto& g : groups)
        for (const auto& w : g.words)
            if (seen.insert(w).second) out.push_back(w);
    return out;
}

Labels ValidationDataset::labels_for(std::string_view label) const {
    const ValidationGroup& g = group(label);
    Labels out;
    for (const auto& w : pool()) out.emplace(w, false);
    for (const auto& w : g.words) out[w] = true;
    return out;
}

const ValidationDataset& validation_set() {
    static const ValidationDataset data = make_validation();
    return data;
}

const GroupGrid& builtin_grid() {
    static const GroupGrid grid = make_grid();
    return grid;
}

std::string intersectional_group_label(std::string_view cell_id) {
    return "Intersectional Biases of " + cell_phrase(cell_id);
}

std::string emergent_group_label(std::string_view cell_id) {
    return "Emergent Intersectional Biases of " + cell_phrase(cell_id);
}

// ---------------------------------------------------------------------------
// Spec files

WeatSpec parse_spec(std::string_view json_text, std::string_view origin) {
    using nlohmann::json;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCategory::validation, std::string(origin) + ": " + msg);
    };
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCategory::format, std::string(origin) + ": " + e.what());
    }
    if (!doc.is_object()) fail("$: expected an object");

    WeatSpec spec;
    if (!doc.contains("label") || !doc["label"].is_string()) fail("$.label: expected a string");
    spec.label = doc["label"].get<std::string>();
    auto read_set = [&](const char* key, std::vector<std::string>& out) {
        if (!doc.contains(key) || !doc[key].is_array()) fail(std::string("$.") + key + ": expected an array of words");
        const auto& arr = doc[key];
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string())
                fail(std::string("$.") + key + "[" + std::to_string(i) + "]: expected a string");
            out.push_back(arr[i].get<std::string>());
        }
    };
    read_set("X", spec.x);
    read_set("Y", spec.y);
    read_set("A", spec.a);
    read_set("B", spec.b);
    try {
        validate(spec);
    } catch (const Error& e) {
        fail(e.what());
    }
    return spec;
}

WeatSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open spec file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str(), path.string());
}

std::string spec_to_json(const WeatSpec& spec) {
    nlohmann::ordered_json doc = {{"label", spec.label}, {"X", spec.x}, {"Y", spec.y}, {"A", spec.a}, {"B", spec.b}};
    return doc.dump(2) + "\n";
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("BIASLENS_DATA"); env && *env) return env;
    return BIASLENS_DEFAULT_DATA_DIR;
}

}  // namespace biaslens
