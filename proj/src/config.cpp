#include "nrr/config.hpp"

#include <cctype>
#include <cstdlib>
#include <set>
#include <string>

#include "nrr/textio.hpp"

namespace nrr::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) { throw ConfigError("config: " + message); }

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path + " must be an object");
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) fail("unknown key " + path + key);
    }
}

double get_double(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path + " must be a number");
    return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path + " must be an integer");
    return j.get<int>();
}

std::uint64_t get_uint(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.is_number_float() || j.get<std::int64_t>() < 0)
        fail(path + " must be a non-negative integer");
    return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path + " must be a boolean");
    return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path + " must be a string");
    return j.get<std::string>();
}

std::vector<double> get_double_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path + " must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_double(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<int> get_int_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path + " must be an array");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_int(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

// an explicit list, or {"first": A, "last": B} expanded inclusively
std::vector<int> get_year_list(const json& j, const std::string& path) {
    if (j.is_array()) return get_int_list(j, path);
    if (j.is_object()) {
        reject_unknown(j, path + ".", {"first", "last"});
        if (!j.contains("first")) fail("missing required key " + path + ".first");
        if (!j.contains("last")) fail("missing required key " + path + ".last");
        const int first = get_int(j.at("first"), path + ".first");
        const int last = get_int(j.at("last"), path + ".last");
        if (last < first) fail(path + ": last year precedes first");
        std::vector<int> out;
        for (int y = first; y <= last; ++y) out.push_back(y);
        return out;
    }
    fail(path + " must be an array or a {first, last} object");
}

datagen::SiteConfig parse_site(const json& j, const std::string& path) {
    expect_object(j, path);
    const std::set<std::string> allowed{"site_id",         "mean_temp",
                                        "temp_amplitude",  "mean_radiation",
                                        "radiation_amplitude", "rain_prob_summer",
                                        "rain_prob_winter", "rain_mean_mm"};
    reject_unknown(j, path + ".", allowed);
    for (const std::string& key : allowed)
        if (!j.contains(key)) fail("missing required key " + path + "." + key);
    datagen::SiteConfig site;
    site.site_id = get_string(j.at("site_id"), path + ".site_id");
    site.mean_temp = get_double(j.at("mean_temp"), path + ".mean_temp");
    site.temp_amplitude = get_double(j.at("temp_amplitude"), path + ".temp_amplitude");
    site.mean_radiation = get_double(j.at("mean_radiation"), path + ".mean_radiation");
    site.radiation_amplitude =
        get_double(j.at("radiation_amplitude"), path + ".radiation_amplitude");
    site.rain_prob_summer = get_double(j.at("rain_prob_summer"), path + ".rain_prob_summer");
    site.rain_prob_winter = get_double(j.at("rain_prob_winter"), path + ".rain_prob_winter");
    site.rain_mean_mm = get_double(j.at("rain_mean_mm"), path + ".rain_mean_mm");
    return site;
}

void parse_grid(const json& j, datagen::ScenarioGrid& grid) {
    expect_object(j, "grid");
    reject_unknown(j, "grid.",
                   {"sites", "pawc", "soil_carbon", "irrigation", "years", "months", "days",
                    "n_amounts"});
    if (!j.contains("sites")) fail("missing required key grid.sites");
    const json& sites = j.at("sites");
    if (!sites.is_array() || sites.empty()) fail("grid.sites must be a non-empty array");
    grid.sites.clear();
    for (std::size_t i = 0; i < sites.size(); ++i)
        grid.sites.push_back(parse_site(sites[i], "grid.sites[" + std::to_string(i) + "]"));
    if (j.contains("pawc")) grid.soil_water_levels = get_double_list(j.at("pawc"), "grid.pawc");
    if (j.contains("soil_carbon"))
        grid.soil_fertility_levels = get_double_list(j.at("soil_carbon"), "grid.soil_carbon");
    if (j.contains("irrigation")) {
        const json& irr = j.at("irrigation");
        if (!irr.is_array()) fail("grid.irrigation must be an array");
        grid.irrigation_levels.clear();
        for (std::size_t i = 0; i < irr.size(); ++i)
            grid.irrigation_levels.push_back(
                get_bool(irr[i], "grid.irrigation[" + std::to_string(i) + "]"));
    }
    if (j.contains("years")) grid.years = get_year_list(j.at("years"), "grid.years");
    if (j.contains("months")) grid.months = get_int_list(j.at("months"), "grid.months");
    if (j.contains("days")) grid.days = get_int_list(j.at("days"), "grid.days");
    if (j.contains("n_amounts"))
        grid.n_amounts = get_double_list(j.at("n_amounts"), "grid.n_amounts");
}

void parse_constants(const json& j, datagen::SurrogateConstants& c) {
    expect_object(j, "constants");
    struct Field {
        const char* name;
        double* slot;
    };
    const Field fields[] = {
        {"g_max", &c.g_max},
        {"response_k", &c.response_k},
        {"response_a0", &c.response_a0},
        {"temp_noise_sd", &c.temp_noise_sd},
        {"tmin_gap_mean", &c.tmin_gap_mean},
        {"tmin_gap_sd", &c.tmin_gap_sd},
        {"rad_noise_sd", &c.rad_noise_sd},
        {"rad_floor", &c.rad_floor},
        {"label_noise_sigma_log", &c.label_noise_sigma_log},
        {"initial_water_fraction", &c.initial_water_fraction},
        {"mineral_n0", &c.mineral_n0},
        {"mineralization_per_carbon", &c.mineralization_per_carbon},
        {"n_uptake_per_growth", &c.n_uptake_per_growth},
    };
    std::set<std::string> allowed;
    for (const Field& f : fields) allowed.insert(f.name);
    reject_unknown(j, "constants.", allowed);
    for (const Field& f : fields)
        if (j.contains(f.name)) *f.slot = get_double(j.at(f.name), "constants." + std::string(f.name));
}

void parse_split(const json& j, features::SplitSpec& split) {
    expect_object(j, "split");
    reject_unknown(j, "split.", {"validation_years", "test_years"});
    if (j.contains("validation_years"))
        split.validation_years = get_int_list(j.at("validation_years"), "split.validation_years");
    if (j.contains("test_years"))
        split.test_years = get_int_list(j.at("test_years"), "split.test_years");
}

std::vector<std::uint64_t> parse_seeds_value(const json& j) {
    if (j.is_string()) return parse_seed_list(j.get<std::string>());
    if (!j.is_array()) fail("seeds must be an array or a range string");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_uint(j[i], "seeds[" + std::to_string(i) + "]"));
    if (out.empty()) fail("seeds must be non-empty");
    std::set<std::uint64_t> seen(out.begin(), out.end());
    if (seen.size() != out.size()) fail("seeds contain duplicates");
    return out;
}

std::vector<models::ModelKind> parse_models_value(const json& j) {
    if (j.is_string()) return parse_model_list(j.get<std::string>());
    if (!j.is_array()) fail("models must be an array or a comma list");
    std::string joined;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) joined += ",";
        joined += get_string(j[i], "models[" + std::to_string(i) + "]");
    }
    return parse_model_list(joined);
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::uint64_t parse_seed_number(const std::string& text) {
    if (text.empty()) throw ConfigError("seed list: empty item");
    for (char ch : text)
        if (!std::isdigit(static_cast<unsigned char>(ch)))
            throw ConfigError("seed list: bad number '" + text + "'");
    return static_cast<std::uint64_t>(parse_int(text));
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const std::string& item : split_commas(text)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(parse_seed_number(item));
            continue;
        }
        const std::uint64_t first = parse_seed_number(item.substr(0, dots));
        const std::uint64_t last = parse_seed_number(item.substr(dots + 2));
        if (last < first) throw ConfigError("seed list: descending range '" + item + "'");
        for (std::uint64_t s = first; s <= last; ++s) out.push_back(s);
    }
    if (out.empty()) throw ConfigError("seed list: empty");
    std::set<std::uint64_t> seen(out.begin(), out.end());
    if (seen.size() != out.size()) throw ConfigError("seed list: duplicates");
    return out;
}

std::vector<models::ModelKind> parse_model_list(const std::string& text) {
    if (text == "all") return models::all_model_kinds();
    std::vector<models::ModelKind> out;
    for (const std::string& item : split_commas(text)) {
        if (item.empty()) throw ConfigError("model list: empty item");
        out.push_back(models::model_kind_from_string(item));
    }
    std::set<models::ModelKind> seen(out.begin(), out.end());
    if (seen.size() != out.size()) throw ConfigError("model list: duplicates");
    return out;
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
    expect_object(doc, "config");
    reject_unknown(doc, "",
                   {"master_seed", "seeds", "models", "grid", "constants", "split", "out_dir",
                    "jobs"});
    ExperimentConfig cfg;
    if (doc.contains("master_seed")) cfg.master_seed = get_uint(doc.at("master_seed"), "master_seed");
    if (doc.contains("seeds")) cfg.seeds = parse_seeds_value(doc.at("seeds"));
    if (doc.contains("models")) cfg.model_kinds = parse_models_value(doc.at("models"));
    if (!doc.contains("grid")) fail("missing required key grid");
    parse_grid(doc.at("grid"), cfg.grid);
    if (doc.contains("constants")) parse_constants(doc.at("constants"), cfg.constants);
    if (doc.contains("split")) parse_split(doc.at("split"), cfg.split);
    if (doc.contains("out_dir")) cfg.out_dir = get_string(doc.at("out_dir"), "out_dir");
    if (doc.contains("jobs")) cfg.jobs = get_int(doc.at("jobs"), "jobs");
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    } catch (const DataError& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    ExperimentConfig cfg = parse_config(doc);
    if (const char* env = std::getenv("NRR_MASTER_SEED"); env && *env) {
        try {
            cfg.master_seed = parse_seed_number(env);
        } catch (const ConfigError&) {
            throw ConfigError("NRR_MASTER_SEED is not a non-negative integer: " +
                              std::string(env));
        }
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    grid.validate();
    split.validate();
    if (seeds.empty()) fail("seeds must be non-empty");
    if (model_kinds.empty()) fail("models must be non-empty");
    if (out_dir.empty()) fail("out_dir must be non-empty");
    if (jobs < 1) fail("jobs must be at least 1");
    const datagen::SurrogateConstants defaults;
    (void)defaults;
    if (constants.temp_noise_sd < 0 || constants.tmin_gap_sd < 0 || constants.rad_noise_sd < 0 ||
        constants.label_noise_sigma_log < 0)
        fail("constants: noise scales must be non-negative");
    if (constants.initial_water_fraction < 0 || constants.initial_water_fraction > 1)
        fail("constants: initial_water_fraction must lie in [0, 1]");
    if (constants.g_max <= 0 || constants.response_k <= 0 || constants.response_a0 <= 0)
        fail("constants: growth and response scales must be positive");
}

nlohmann::json effective_json(const ExperimentConfig& cfg) {
    nlohmann::json sites = nlohmann::json::array();
    for (const datagen::SiteConfig& s : cfg.grid.sites) {
        sites.push_back({{"site_id", s.site_id},
                         {"mean_temp", s.mean_temp},
                         {"temp_amplitude", s.temp_amplitude},
                         {"mean_radiation", s.mean_radiation},
                         {"radiation_amplitude", s.radiation_amplitude},
                         {"rain_prob_summer", s.rain_prob_summer},
                         {"rain_prob_winter", s.rain_prob_winter},
                         {"rain_mean_mm", s.rain_mean_mm}});
    }
    const datagen::SurrogateConstants& c = cfg.constants;
    return nlohmann::json{
        {"master_seed", cfg.master_seed},
        {"grid",
         {{"sites", sites},
          {"pawc", cfg.grid.soil_water_levels},
          {"soil_carbon", cfg.grid.soil_fertility_levels},
          {"irrigation", cfg.grid.irrigation_levels},
          {"years", cfg.grid.years},
          {"months", cfg.grid.months},
          {"days", cfg.grid.days},
          {"n_amounts", cfg.grid.n_amounts}}},
        {"constants",
         {{"g_max", c.g_max},
          {"response_k", c.response_k},
          {"response_a0", c.response_a0},
          {"temp_noise_sd", c.temp_noise_sd},
          {"tmin_gap_mean", c.tmin_gap_mean},
          {"tmin_gap_sd", c.tmin_gap_sd},
          {"rad_noise_sd", c.rad_noise_sd},
          {"rad_floor", c.rad_floor},
          {"label_noise_sigma_log", c.label_noise_sigma_log},
          {"initial_water_fraction", c.initial_water_fraction},
          {"mineral_n0", c.mineral_n0},
          {"mineralization_per_carbon", c.mineralization_per_carbon},
          {"n_uptake_per_growth", c.n_uptake_per_growth}}},
        {"split",
         {{"validation_years", cfg.split.validation_years},
          {"test_years", cfg.split.test_years}}}};
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string dump = effective_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = config_hash(cfg);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace nrr::config
