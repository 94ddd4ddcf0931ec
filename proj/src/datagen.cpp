#include "nrr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "nrr/textio.hpp"

namespace nrr::datagen {

void SiteConfig::validate() const {
    if (site_id.empty()) throw ConfigError("site_id must be non-empty");
    if (temp_amplitude < 0) throw ConfigError("temp_amplitude must be >= 0 for " + site_id);
    for (double p : {rain_prob_summer, rain_prob_winter})
        if (p < 0.0 || p > 1.0) throw ConfigError("rain probabilities must be in [0,1] for " + site_id);
    if (rain_mean_mm <= 0) throw ConfigError("rain_mean_mm must be > 0 for " + site_id);
}

std::vector<SiteConfig> builtin_sites() {
    return {
        {"waiotu", 15.5, 4.5, 14.5, 7.0, 0.25, 0.50, 11.0},
        {"mahana", 13.0, 5.0, 14.0, 7.5, 0.20, 0.40, 9.0},
        {"ruakura", 13.8, 5.5, 13.5, 7.0, 0.30, 0.55, 10.0},
    };
}

SiteConfig builtin_site(const std::string& site_id) {
    for (SiteConfig& s : builtin_sites())
        if (s.site_id == site_id) return s;
    throw ConfigError("unknown builtin site '" + site_id + "'");
}

std::vector<int> ScenarioGrid::default_years() {
    std::vector<int> ys;
    for (int y = 1979; y <= 2018; ++y) ys.push_back(y);
    return ys;
}

void ScenarioGrid::validate() const {
    if (sites.empty()) throw ConfigError("grid has no sites");
    for (const SiteConfig& s : sites) s.validate();
    if (soil_water_levels.empty()) throw ConfigError("grid has no soil_water_levels");
    if (soil_fertility_levels.empty()) throw ConfigError("grid has no soil_fertility_levels");
    if (irrigation_levels.empty()) throw ConfigError("grid has no irrigation_levels");
    if (years.empty()) throw ConfigError("grid has no years");
    if (months.empty()) throw ConfigError("grid has no months");
    if (days.empty()) throw ConfigError("grid has no days");
    if (n_amounts.empty()) throw ConfigError("grid has no n_amounts");
    for (double w : soil_water_levels)
        if (w <= 0) throw ConfigError("soil water level must be > 0");
    for (int m : months)
        if (m < 1 || m > 12) throw ConfigError("month out of range");
    for (int y : years) {
        for (int m : months)
            for (int d : days)
                if (!Date::valid(y, m, d))
                    throw ConfigError("invalid fertilization date " + Date{y, m, d}.iso());
    }
    for (double n : n_amounts)
        if (n < 0) throw ConfigError("n_amount must be >= 0");
}

std::size_t ScenarioGrid::scenario_count() const {
    return sites.size() * soil_water_levels.size() * soil_fertility_levels.size() *
           irrigation_levels.size() * years.size() * months.size() * days.size() *
           n_amounts.size();
}

StreamKey scenario_key(std::uint64_t master_seed, const Scenario& s) {
    return StreamKey(master_seed)
        .add(s.site_id)
        .add(s.pawc)
        .add(s.soil_carbon)
        .add(s.irrigated)
        .add(s.fert_year)
        .add(s.fert_month)
        .add(s.fert_day)
        .add(s.n_amount);
}

std::vector<Scenario> enumerate_scenarios(const ScenarioGrid& grid) {
    grid.validate();
    std::vector<Scenario> out;
    out.reserve(grid.scenario_count());
    for (const SiteConfig& site : grid.sites)
        for (double pawc : grid.soil_water_levels)
            for (double carbon : grid.soil_fertility_levels)
                for (bool irr : grid.irrigation_levels)
                    for (int year : grid.years)
                        for (int month : grid.months)
                            for (int day : grid.days)
                                for (double amount : grid.n_amounts)
                                    out.push_back({site.site_id, pawc, carbon, irr, year, month,
                                                   day, amount});
    return out;
}

double DailyRecord::channel(int c) const {
    switch (c) {
        case 0: return tmax;
        case 1: return tmin;
        case 2: return radiation;
        case 3: return rain;
        case 4: return pet;
        case 5: return soil_water;
        case 6: return mineral_n;
        case 7: return biomass;
        case 8: return growth_rate;
        case 9: return lai;
        case 10: return soil_temp;
        case 11: return drainage;
        case 12: return runoff;
        case 13: return n_uptake;
        case 14: return transpiration;
        default: throw StructuralError("daily channel index out of range");
    }
}

const char* channel_name(int c) {
    static constexpr const char* names[kDailyChannels] = {
        "tmax", "tmin", "radiation", "rain",     "pet",
        "soil_water", "mineral_n", "biomass", "growth_rate", "lai",
        "soil_temp", "drainage", "runoff", "n_uptake", "transpiration"};
    if (c < 0 || c >= kDailyChannels) throw StructuralError("daily channel index out of range");
    return names[c];
}

namespace {

double seasonal_phase(const Date& d) {
    // peak at day-of-year 15: mid-January summer
    return std::cos(2.0 * std::numbers::pi * (d.day_of_year() - 15) / 365.25);
}

double day_noise(std::uint64_t seed, const std::string& site, const Date& d,
                 std::string_view stream, double sd) {
    if (sd == 0.0) return 0.0;
    StreamRng rng(StreamKey(seed).add(site).add(d).add(stream));
    return rng.normal(sd);
}

WeatherDay make_weather_day(const SiteConfig& site, const Date& d, std::uint64_t seed,
                            const SurrogateConstants& k) {
    WeatherDay w;
    w.date = d;
    const double phase = seasonal_phase(d);
    w.tmax = site.mean_temp + site.temp_amplitude * phase +
             day_noise(seed, site.site_id, d, "tmax", k.temp_noise_sd);
    const double gap = std::max(
        0.0, k.tmin_gap_mean + day_noise(seed, site.site_id, d, "tgap", k.tmin_gap_sd));
    w.tmin = w.tmax - gap;
    w.radiation = std::max(k.rad_floor, site.mean_radiation + site.radiation_amplitude * phase +
                                            day_noise(seed, site.site_id, d, "rad", k.rad_noise_sd));
    const double p_wet =
        site.rain_prob_winter + (site.rain_prob_summer - site.rain_prob_winter) * (1.0 + phase) / 2.0;
    StreamRng wet_rng(StreamKey(seed).add(site.site_id).add(d).add("wet"));
    if (wet_rng.bernoulli(p_wet)) {
        StreamRng amt_rng(StreamKey(seed).add(site.site_id).add(d).add("rainamt"));
        w.rain = amt_rng.exponential(site.rain_mean_mm);
    }
    w.pet = std::max(0.0, 0.05 * w.radiation * ((w.tmax + w.tmin) / 2.0) / 20.0);
    return w;
}

}  // namespace

WeatherSeries synthesize_weather(const SiteConfig& site, Date first, Date last,
                                 std::uint64_t master_seed, const SurrogateConstants& constants) {
    site.validate();
    if (last < first) throw ConfigError("weather span is empty");
    const std::int64_t n = last.serial() - first.serial() + 1;
    std::vector<WeatherDay> days(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        days[static_cast<std::size_t>(i)] =
            make_weather_day(site, first.plus_days(i), master_seed, constants);
    return WeatherSeries(first, std::move(days));
}

WeatherSeries synthesize_weather_for_years(const SiteConfig& site, int first_year, int last_year,
                                           std::uint64_t master_seed,
                                           const SurrogateConstants& constants) {
    if (last_year < first_year) throw ConfigError("weather year range is empty");
    const Date first = Date{first_year, 1, 1}.plus_days(-kDaysBefore);
    const Date last = Date{last_year, 12, 31}.plus_days(kDaysAfter);
    return synthesize_weather(site, first, last, master_seed, constants);
}

namespace {

bool irrigation_season(int month) {
    return month >= 10 || month <= 4;  // October through April
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

SimulationResult simulate(const Scenario& scenario, const WeatherSeries& weather,
                          std::uint64_t master_seed, const SurrogateConstants& k) {
    if (!Date::valid(scenario.fert_year, scenario.fert_month, scenario.fert_day))
        throw ConfigError("invalid fertilization date in scenario");
    const Date fert = scenario.fert_date();
    const Date first = fert.plus_days(-kDaysBefore);
    const Date last = fert.plus_days(kDaysAfter);

    SimulationResult result;
    result.scenario = scenario;
    result.daily.reserve(static_cast<std::size_t>(kDaysBefore + 1 + kDaysAfter));

    const double half_capacity = 0.5 * scenario.pawc;
    const double g_max = k.g_max * (0.7 + 0.1 * scenario.soil_carbon);
    double water = k.initial_water_fraction * scenario.pawc;
    double mineral_n = k.mineral_n0;
    double biomass = 0.0;

    // trailing window of daily mean temperatures for soil_temp
    std::vector<double> tmean_history;
    std::vector<double> window_factor;  // f_T*f_W over the response window
    window_factor.reserve(kDaysAfter);

    for (Date d = first; d <= last; d = d.plus_days(1)) {
        const WeatherDay& w = weather.at(d);
        const double tmean = (w.tmax + w.tmin) / 2.0;

        const double aet = w.pet * std::min(1.0, water / half_capacity);
        double irrigation = 0.0;
        if (scenario.irrigated && irrigation_season(d.month) && water < half_capacity)
            irrigation = scenario.pawc - water;
        const double raw = water + w.rain + irrigation - aet;
        const double overflow = std::max(0.0, raw - scenario.pawc);
        water = std::clamp(raw, 0.0, scenario.pawc);
        const double runoff = std::min(overflow, w.rain);
        const double drainage = overflow - runoff;

        const double f_t = clamp01((tmean - 5.0) / 15.0);
        const double f_r = clamp01(w.radiation / 25.0);
        const double f_w = std::min(1.0, water / half_capacity);
        const double growth = g_max * f_t * f_r * f_w;
        biomass += growth;

        mineral_n += k.mineralization_per_carbon * scenario.soil_carbon;
        const double uptake = std::min(k.n_uptake_per_growth * growth, mineral_n);
        mineral_n -= uptake;
        if (d == fert) mineral_n += scenario.n_amount;

        tmean_history.push_back(tmean);
        const std::size_t span = std::min<std::size_t>(7, tmean_history.size());
        double soil_temp = 0.0;
        for (std::size_t i = tmean_history.size() - span; i < tmean_history.size(); ++i)
            soil_temp += tmean_history[i];
        soil_temp /= static_cast<double>(span);

        DailyRecord rec;
        rec.date = d;
        rec.tmax = w.tmax;
        rec.tmin = w.tmin;
        rec.radiation = w.radiation;
        rec.rain = w.rain;
        rec.pet = w.pet;
        rec.soil_water = water;
        rec.mineral_n = mineral_n;
        rec.biomass = biomass;
        rec.growth_rate = growth;
        rec.lai = std::min(6.0, biomass / 1500.0);
        rec.soil_temp = soil_temp;
        rec.drainage = drainage;
        rec.runoff = runoff;
        rec.n_uptake = uptake;
        rec.transpiration = aet;
        result.daily.push_back(rec);

        if (d > fert) window_factor.push_back(f_t * f_w);
    }

    if (scenario.n_amount > 0.0) {
        double factor_sum = 0.0;
        for (double v : window_factor) factor_sum += v;
        const double e_mean = factor_sum / static_cast<double>(window_factor.size());
        StreamRng label_rng(scenario_key(master_seed, scenario).add("label"));
        const double s = k.label_noise_sigma_log == 0.0
                             ? 1.0
                             : label_rng.lognormal_factor(k.label_noise_sigma_log);
        const double amplitude = k.response_a0 * e_mean * (1.0 - scenario.soil_carbon / 10.0) * s;
        const double delta_y = amplitude * (1.0 - std::exp(-k.response_k * scenario.n_amount));
        result.nrr = delta_y / scenario.n_amount;

        // distribute the response across the window in proportion to the
        // daily growth factor, so fertilized biomass stays day-consistent
        if (factor_sum > 0.0) {
            double cumulative = 0.0;
            for (std::size_t i = 0; i < window_factor.size(); ++i) {
                const double share = delta_y * window_factor[i] / factor_sum;
                cumulative += share;
                DailyRecord& rec = result.daily[static_cast<std::size_t>(kDaysBefore) + 1 + i];
                rec.growth_rate += share;
                rec.biomass += cumulative;
                rec.lai = std::min(6.0, rec.biomass / 1500.0);
            }
        }
    }
    return result;
}

double nrr_label(const Scenario& scenario, const WeatherSeries& weather,
                 std::uint64_t master_seed, const SurrogateConstants& constants) {
    if (scenario.n_amount <= 0.0)
        throw DataError("nrr label undefined for n_amount = 0 scenarios");
    return *simulate(scenario, weather, master_seed, constants).nrr;
}

// ---- dataset files ------------------------------------------------------

std::vector<std::string> scenario_fields(const Scenario& s) {
    return {s.site_id,
            format_double(s.pawc),
            format_double(s.soil_carbon),
            s.irrigated ? "1" : "0",
            std::to_string(s.fert_year),
            std::to_string(s.fert_month),
            std::to_string(s.fert_day),
            format_double(s.n_amount)};
}

Scenario parse_scenario_fields(const std::vector<std::string>& f) {
    Scenario s;
    s.site_id = f[0];
    s.pawc = parse_double(f[1]);
    s.soil_carbon = parse_double(f[2]);
    s.irrigated = f[3] == "1";
    s.fert_year = static_cast<int>(parse_int(f[4]));
    s.fert_month = static_cast<int>(parse_int(f[5]));
    s.fert_day = static_cast<int>(parse_int(f[6]));
    s.n_amount = parse_double(f[7]);
    return s;
}

std::vector<std::string> daily_file_header() {
    std::vector<std::string> h = {"site",      "pawc",       "soil_carbon", "irrigated",
                                  "fert_year", "fert_month", "fert_day",    "n_amount",
                                  "date"};
    for (int c = 0; c < kDailyChannels; ++c) h.push_back(channel_name(c));
    return h;
}

std::vector<std::string> label_file_header() {
    return {"site",      "pawc",       "soil_carbon", "irrigated", "fert_year",
            "fert_month", "fert_day",  "n_amount",    "nrr"};
}

void write_daily_file(const std::string& path, const std::vector<SimulationResult>& results) {
    CsvWriter out(path);
    out.row(daily_file_header());
    for (const SimulationResult& r : results) {
        const std::vector<std::string> key = scenario_fields(r.scenario);
        for (const DailyRecord& rec : r.daily) {
            std::vector<std::string> row = key;
            row.push_back(rec.date.iso());
            for (int c = 0; c < kDailyChannels; ++c) row.push_back(format_double(rec.channel(c)));
            out.row(row);
        }
    }
    out.close();
}

void write_label_file(const std::string& path, const std::vector<SimulationResult>& results) {
    CsvWriter out(path);
    out.row(label_file_header());
    for (const SimulationResult& r : results) {
        if (!r.nrr) continue;
        std::vector<std::string> row = scenario_fields(r.scenario);
        row.push_back(format_double(*r.nrr));
        out.row(row);
    }
    out.close();
}

namespace {

Date parse_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw DataError("bad date field: " + s);
    const int y = static_cast<int>(parse_int(s.substr(0, 4)));
    const int m = static_cast<int>(parse_int(s.substr(5, 2)));
    const int d = static_cast<int>(parse_int(s.substr(8, 2)));
    if (!Date::valid(y, m, d)) throw DataError("bad date field: " + s);
    return Date{y, m, d};
}

void set_channel(DailyRecord& rec, int c, double v) {
    switch (c) {
        case 0: rec.tmax = v; break;
        case 1: rec.tmin = v; break;
        case 2: rec.radiation = v; break;
        case 3: rec.rain = v; break;
        case 4: rec.pet = v; break;
        case 5: rec.soil_water = v; break;
        case 6: rec.mineral_n = v; break;
        case 7: rec.biomass = v; break;
        case 8: rec.growth_rate = v; break;
        case 9: rec.lai = v; break;
        case 10: rec.soil_temp = v; break;
        case 11: rec.drainage = v; break;
        case 12: rec.runoff = v; break;
        case 13: rec.n_uptake = v; break;
        case 14: rec.transpiration = v; break;
        default: throw StructuralError("daily channel index out of range");
    }
}

}  // namespace

std::vector<SimulationResult> read_daily_file(const std::string& path) {
    CsvReader in(path);
    if (in.header() != daily_file_header()) throw DataError("unexpected header in " + path);
    std::vector<SimulationResult> results;
    std::vector<std::string> key;
    std::vector<std::string> fields;
    while (in.row(fields)) {
        std::vector<std::string> row_key(fields.begin(), fields.begin() + kScenarioFieldCount);
        if (results.empty() || row_key != key) {
            results.emplace_back();
            results.back().scenario = parse_scenario_fields(fields);
            key = std::move(row_key);
        }
        DailyRecord rec;
        rec.date = parse_iso_date(fields[kScenarioFieldCount]);
        for (int c = 0; c < kDailyChannels; ++c)
            set_channel(rec, c, parse_double(fields[kScenarioFieldCount + 1 + static_cast<std::size_t>(c)]));
        std::vector<DailyRecord>& daily = results.back().daily;
        if (!daily.empty() && rec.date.serial() != daily.back().date.serial() + 1)
            throw DataError("daily series not contiguous in " + path);
        daily.push_back(rec);
    }
    return results;
}

void read_label_file(const std::string& path, std::vector<SimulationResult>& results) {
    CsvReader in(path);
    if (in.header() != label_file_header()) throw DataError("unexpected header in " + path);
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const std::vector<std::string> key = scenario_fields(results[i].scenario);
        std::string joined;
        for (const std::string& f : key) joined += f + ",";
        index.emplace(std::move(joined), i);
    }
    std::vector<std::string> fields;
    while (in.row(fields)) {
        std::string joined;
        for (std::size_t i = 0; i < kScenarioFieldCount; ++i) joined += fields[i] + ",";
        const auto it = index.find(joined);
        if (it == index.end())
            throw DataError("label row without matching scenario in " + path);
        results[it->second].nrr = parse_double(fields[kScenarioFieldCount]);
    }
}

}  // namespace nrr::datagen
