#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nrr/calendar.hpp"
#include "nrr/common.hpp"
#include "nrr/rng.hpp"

namespace nrr::datagen {

/// Climate parameters of one weather site. Seasonal curves are cosines with
/// their peak mid-January (southern hemisphere summer).
struct SiteConfig {
    std::string site_id;
    double mean_temp = 0.0;             // degC
    double temp_amplitude = 0.0;        // degC
    double mean_radiation = 0.0;        // MJ/m2/day
    double radiation_amplitude = 0.0;   // MJ/m2/day
    double rain_prob_summer = 0.0;
    double rain_prob_winter = 0.0;
    double rain_mean_mm = 1.0;          // mm per wet day

    void validate() const;
};

// the three studied site analogues, in enumeration order
std::vector<SiteConfig> builtin_sites();
SiteConfig builtin_site(const std::string& site_id);

/// Tunable constants of the growth surrogate and its label model. Defaults
/// are the study values; tests override single knobs (e.g. zero noise).
struct SurrogateConstants {
    double g_max = 60.0;                  // kg DM/ha/day at carbon scale 1
    double response_k = 0.015;            // /kg N
    double response_a0 = 900.0;           // kg DM/ha response ceiling
    double temp_noise_sd = 2.0;           // degC
    double tmin_gap_mean = 8.0;           // degC
    double tmin_gap_sd = 1.0;             // degC
    double rad_noise_sd = 1.5;            // MJ/m2/day
    double rad_floor = 2.0;               // MJ/m2/day
    double label_noise_sigma_log = 0.10;  // lognormal sigma of the label factor
    double initial_water_fraction = 1.0;  // W0 as a fraction of pawc
    double mineral_n0 = 50.0;             // kg N/ha at series start
    double mineralization_per_carbon = 0.05;  // kg N/ha/day per % carbon
    double n_uptake_per_growth = 0.03;    // kg N per kg DM grown
};

/// Factor levels of the scenario factorial. Defaults reproduce the study
/// grid; the desk configuration shrinks every axis.
struct ScenarioGrid {
    std::vector<SiteConfig> sites;
    std::vector<double> soil_water_levels{42, 67, 110, 177};  // pawc, mm
    std::vector<double> soil_fertility_levels{2, 4, 6};       // % carbon
    std::vector<bool> irrigation_levels{true, false};
    std::vector<int> years = default_years();
    std::vector<int> months{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<int> days{5, 15, 25};
    std::vector<double> n_amounts{0, 20, 40, 60, 80, 100};

    static std::vector<int> default_years();  // 1979..2018
    void validate() const;                    // empty level set -> ConfigError
    std::size_t scenario_count() const;
};

struct Scenario {
    std::string site_id;
    double pawc = 0.0;
    double soil_carbon = 0.0;
    bool irrigated = false;
    int fert_year = 0;
    int fert_month = 0;
    int fert_day = 0;
    double n_amount = 0.0;

    Date fert_date() const { return Date{fert_year, fert_month, fert_day}; }
    bool operator==(const Scenario&) const = default;
};

// folds every scenario field, so per-scenario streams never collide
StreamKey scenario_key(std::uint64_t master_seed, const Scenario& s);

/// Enumerates the Cartesian product in fixed order: site, pawc, carbon,
/// irrigation, year, month, day, amount (slowest to fastest).
std::vector<Scenario> enumerate_scenarios(const ScenarioGrid& grid);

constexpr int kDailyChannels = 15;

struct DailyRecord {
    Date date;
    // weather channels
    double tmax = 0.0;
    double tmin = 0.0;
    double radiation = 0.0;
    double rain = 0.0;
    double pet = 0.0;
    // biophysical channels
    double soil_water = 0.0;
    double mineral_n = 0.0;
    double biomass = 0.0;
    double growth_rate = 0.0;
    double lai = 0.0;
    double soil_temp = 0.0;
    double drainage = 0.0;
    double runoff = 0.0;
    double n_uptake = 0.0;
    double transpiration = 0.0;

    double channel(int c) const;
};

// stable channel order used by feature layouts and file headers
const char* channel_name(int c);

struct WeatherDay {
    Date date;
    double tmax = 0.0, tmin = 0.0, radiation = 0.0, rain = 0.0, pet = 0.0;
};

/// Daily weather over a contiguous date span. Each day is a pure function of
/// (master_seed, site_id, date), so overlapping spans agree exactly.
class WeatherSeries {
public:
    WeatherSeries() = default;
    WeatherSeries(Date first, std::vector<WeatherDay> days)
        : first_(first), days_(std::move(days)) {}

    const WeatherDay& at(const Date& d) const {
        const std::int64_t idx = d.serial() - first_.serial();
        if (idx < 0 || idx >= static_cast<std::int64_t>(days_.size()))
            throw DataError("weather series does not cover " + d.iso());
        return days_[static_cast<std::size_t>(idx)];
    }

    Date first() const { return first_; }
    std::size_t size() const { return days_.size(); }
    const std::vector<WeatherDay>& days() const { return days_; }

private:
    Date first_{1970, 1, 1};
    std::vector<WeatherDay> days_;
};

WeatherSeries synthesize_weather(const SiteConfig& site, Date first, Date last,
                                 std::uint64_t master_seed,
                                 const SurrogateConstants& constants = {});

/// Span of years padded so every scenario window and response period of that
/// year range is covered: [Jan 1 first_year - 28 d, Dec 31 last_year + 61 d].
WeatherSeries synthesize_weather_for_years(const SiteConfig& site, int first_year, int last_year,
                                           std::uint64_t master_seed,
                                           const SurrogateConstants& constants = {});

// days of daily series around fertilization
constexpr int kDaysBefore = 28;
constexpr int kDaysAfter = 61;  // the two-month response window

struct SimulationResult {
    Scenario scenario;
    std::vector<DailyRecord> daily;  // fert_date-28 .. fert_date+61, contiguous
    std::optional<double> nrr;       // present iff n_amount > 0
};

/// Daily soil-water bucket plus growth surrogate over the 90-day span of one
/// scenario. The nitrogen response is added additively to biomass across the
/// response window, so a paired run against the n_amount = 0 twin recovers
/// the closed-form label exactly.
SimulationResult simulate(const Scenario& scenario, const WeatherSeries& weather,
                          std::uint64_t master_seed, const SurrogateConstants& constants = {});

/// Closed-form label: NRR = A(1 - exp(-k N))/N with A = a0 * E * (1 - carbon/10) * S.
/// E averages the thermal-and-water growth factor over the response window.
double nrr_label(const Scenario& scenario, const WeatherSeries& weather,
                 std::uint64_t master_seed, const SurrogateConstants& constants = {});

// ---- dataset files ------------------------------------------------------

// the 8 key columns shared by every dataset file, in header order
constexpr std::size_t kScenarioFieldCount = 8;
std::vector<std::string> scenario_fields(const Scenario& s);
Scenario parse_scenario_fields(const std::vector<std::string>& fields);

// one row per (scenario, day); columns: scenario key, date, 15 channels
void write_daily_file(const std::string& path, const std::vector<SimulationResult>& results);
// one row per scenario with n_amount > 0; columns: scenario key, nrr
void write_label_file(const std::string& path, const std::vector<SimulationResult>& results);

std::vector<SimulationResult> read_daily_file(const std::string& path);
// fills nrr fields of matching results; throws DataError on unknown keys
void read_label_file(const std::string& path, std::vector<SimulationResult>& results);

std::vector<std::string> daily_file_header();
std::vector<std::string> label_file_header();

}  // namespace nrr::datagen
