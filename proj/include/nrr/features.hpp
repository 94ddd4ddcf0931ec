#pragma once

#include <span>
#include <string>
#include <vector>

#include "nrr/datagen.hpp"

namespace nrr::features {

constexpr std::size_t kWindowDays = 28;
constexpr std::size_t kStaticCount = 5;  // n_amount, fert_month/12, irrigated, pawc, soil_carbon
constexpr std::size_t kFeatureCount = kWindowDays * datagen::kDailyChannels + kStaticCount;  // 425
constexpr std::size_t kWeeks = 4;
constexpr std::size_t kRfFeatureCount = kWeeks * datagen::kDailyChannels + kStaticCount;  // 65

// feature index of (day_offset 0..27 oldest-first, channel 0..14)
constexpr std::size_t feature_index(std::size_t day_offset, std::size_t channel) {
    return day_offset * datagen::kDailyChannels + channel;
}

/// The 28 days strictly before fertilization, oldest first. Throws DataError
/// if the series does not cover them; never returns a record dated on or
/// after the fertilization date.
std::vector<datagen::DailyRecord> extract_window(const datagen::SimulationResult& result);

/// 425 values: 28 days x 15 channels oldest-first, then the 5 statics.
std::vector<double> assemble_features(std::span<const datagen::DailyRecord> window,
                                      const datagen::Scenario& scenario);

/// 65 values: 4 weekly channel means oldest-first, then the same 5 statics.
std::vector<double> weekly_aggregate(std::span<const datagen::DailyRecord> window,
                                     const datagen::Scenario& scenario);

struct Sample {
    datagen::Scenario scenario;
    std::vector<double> features;     // 425, standardized downstream
    std::vector<double> rf_features;  // 65, consumed raw
    double target = 0.0;              // nrr
};

// one Sample per labeled result (n_amount > 0 with nrr present)
std::vector<Sample> make_samples(const std::vector<datagen::SimulationResult>& results);

struct SplitSpec {
    std::vector<int> validation_years{1979, 1987, 1999, 2007};
    std::vector<int> test_years = default_test_years();  // 2011..2018

    static std::vector<int> default_test_years();
    void validate() const;  // overlapping sets -> ConfigError

    enum class Part { train, validation, test };
    Part part_of(int year) const;
};

struct SplitSamples {
    std::vector<Sample> train, validation, test;
};

// partition by fert_year, preserving input (scenario key) order within parts
SplitSamples split_by_year(const std::vector<Sample>& samples, const SplitSpec& spec);

/// Per-feature standardization fitted on one location's training rows.
/// Population standard deviation; constant features are centered and left
/// with divisor 1.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;
};

Scaler fit_scaler(const std::vector<Sample>& train);  // < 2 rows -> DataError
void apply_scaler(const Scaler& scaler, std::vector<Sample>& samples);

// ---- sample files -------------------------------------------------------

void write_sample_file(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_sample_file(const std::string& path);

void write_scaler_file(const std::string& path, const Scaler& scaler);
Scaler read_scaler_file(const std::string& path);

}  // namespace nrr::features
