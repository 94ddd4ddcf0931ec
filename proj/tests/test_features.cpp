#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "nrr/features.hpp"

using namespace nrr;
using namespace nrr::features;

namespace {

datagen::Scenario toy_scenario() {
    datagen::Scenario s;
    s.site_id = "waiotu";
    s.pawc = 67;
    s.soil_carbon = 4;
    s.irrigated = true;
    s.fert_year = 1995;
    s.fert_month = 9;
    s.fert_day = 15;
    s.n_amount = 40;
    return s;
}

datagen::SimulationResult toy_result() {
    datagen::SimulationResult r;
    r.scenario = toy_scenario();
    const Date fert = r.scenario.fert_date();
    for (int off = -datagen::kDaysBefore; off <= datagen::kDaysAfter; ++off) {
        datagen::DailyRecord rec;
        rec.date = fert.plus_days(off);
        rec.tmax = off;  // recognizable ramp
        rec.tmin = 2.0 * off;
        rec.biomass = off >= 0 ? 1e9 : 100.0 + off;  // poison at and after fertilization
        r.daily.push_back(rec);
    }
    r.nrr = 7.5;
    return r;
}

std::vector<Sample> toy_samples(std::size_t n, double spread) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.scenario = toy_scenario();
        s.scenario.fert_year = 1990 + static_cast<int>(i);
        s.features.assign(kFeatureCount, 0.0);
        s.features[0] = spread * static_cast<double>(i);
        s.features[1] = 5.0;  // constant column
        s.rf_features.assign(kRfFeatureCount, 3.0);
        s.target = static_cast<double>(i);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("feature layout puts the most recent day's tmax at index 405") {
    CHECK(kFeatureCount == 425);
    CHECK(kRfFeatureCount == 65);
    CHECK(feature_index(27, 0) == 405);
    CHECK(feature_index(0, 0) == 0);
    CHECK(feature_index(0, 14) == 14);
}

TEST_CASE("the window covers exactly the 28 days before fertilization") {
    const datagen::SimulationResult r = toy_result();
    const std::vector<datagen::DailyRecord> window = extract_window(r);
    REQUIRE(window.size() == kWindowDays);
    const Date fert = r.scenario.fert_date();
    CHECK(window.front().date == fert.plus_days(-28));
    CHECK(window.back().date == fert.plus_days(-1));
    for (const datagen::DailyRecord& rec : window) CHECK(rec.date < fert);
}

TEST_CASE("assembled features never contain post-fertilization values") {
    const datagen::SimulationResult r = toy_result();
    const auto window = extract_window(r);
    const std::vector<double> f = assemble_features(window, r.scenario);
    REQUIRE(f.size() == kFeatureCount);
    for (const double v : f) CHECK(std::abs(v) < 1e8);
    // tmax ramp appears oldest-first: day offsets -28 .. -1
    CHECK(f[feature_index(0, 0)] == -28.0);
    CHECK(f[feature_index(27, 0)] == -1.0);
}

TEST_CASE("the static tail encodes the scenario") {
    const datagen::SimulationResult r = toy_result();
    const auto f = assemble_features(extract_window(r), r.scenario);
    CHECK(f[420] == 40.0);
    CHECK(f[421] == doctest::Approx(9.0 / 12.0).epsilon(1e-15));
    CHECK(f[422] == 1.0);
    CHECK(f[423] == 67.0);
    CHECK(f[424] == 4.0);
}

TEST_CASE("weekly aggregation averages seven-day blocks per channel") {
    const datagen::SimulationResult r = toy_result();
    const auto window = extract_window(r);
    const std::vector<double> w = weekly_aggregate(window, r.scenario);
    REQUIRE(w.size() == kRfFeatureCount);
    // week 0 tmax: offsets -28..-22 -> mean -25
    CHECK(w[0] == doctest::Approx(-25.0).epsilon(1e-12));
    // week 3 tmax: offsets -7..-1 -> mean -4
    CHECK(w[3 * datagen::kDailyChannels + 0] == doctest::Approx(-4.0).epsilon(1e-12));
    // tmin doubles the ramp
    CHECK(w[1] == doctest::Approx(-50.0).epsilon(1e-12));
    // statics match the full layout
    CHECK(w[60] == 40.0);
    CHECK(w[64] == 4.0);
}

TEST_CASE("a single nonzero day contributes a seventh of its week's mean") {
    std::vector<datagen::DailyRecord> window(kWindowDays);
    const Date start{1995, 8, 18};
    for (std::size_t i = 0; i < window.size(); ++i)
        window[i].date = start.plus_days(static_cast<int>(i));
    window[0].radiation = 21.0;
    const std::vector<double> w = weekly_aggregate(window, toy_scenario());
    CHECK(w[2] == doctest::Approx(3.0).epsilon(1e-12));                              // week 0
    CHECK(w[1 * datagen::kDailyChannels + 2] == doctest::Approx(0.0).epsilon(1e-12));  // week 1
}

TEST_CASE("samples are made for labeled scenarios only") {
    datagen::SimulationResult labeled = toy_result();
    datagen::SimulationResult unlabeled = toy_result();
    unlabeled.scenario.n_amount = 0;
    unlabeled.nrr.reset();
    const std::vector<Sample> samples = make_samples({labeled, unlabeled});
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].target == 7.5);
    CHECK(samples[0].features.size() == kFeatureCount);
    CHECK(samples[0].rf_features.size() == kRfFeatureCount);
}

TEST_CASE("the default split routes the documented years") {
    const SplitSpec spec;
    spec.validate();
    CHECK(spec.part_of(1987) == SplitSpec::Part::validation);
    CHECK(spec.part_of(1999) == SplitSpec::Part::validation);
    CHECK(spec.part_of(2015) == SplitSpec::Part::test);
    CHECK(spec.part_of(2011) == SplitSpec::Part::test);
    CHECK(spec.part_of(2018) == SplitSpec::Part::test);
    CHECK(spec.part_of(1990) == SplitSpec::Part::train);
    CHECK(spec.part_of(2010) == SplitSpec::Part::train);
}

TEST_CASE("overlapping split year sets are rejected") {
    SplitSpec spec;
    spec.validation_years = {2011};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("splitting partitions samples and preserves order") {
    std::vector<Sample> samples = toy_samples(30, 1.0);  // years 1990..2019
    const SplitSpec spec;
    const SplitSamples split = split_by_year(samples, spec);
    CHECK(split.train.size() + split.validation.size() + split.test.size() == samples.size());
    for (const Sample& s : split.validation)
        CHECK(spec.part_of(s.scenario.fert_year) == SplitSpec::Part::validation);
    for (const Sample& s : split.test)
        CHECK(spec.part_of(s.scenario.fert_year) == SplitSpec::Part::test);
    for (std::size_t i = 1; i < split.train.size(); ++i)
        CHECK(split.train[i].scenario.fert_year > split.train[i - 1].scenario.fert_year);
    // test years 2011..2018 -> 8 rows
    CHECK(split.test.size() == 8);
}

TEST_CASE("the scaler standardizes to zero mean and unit variance") {
    std::vector<Sample> train = toy_samples(2, 2.0);  // feature 0 takes {0, 2}
    const Scaler scaler = fit_scaler(train);
    CHECK(scaler.mean[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(scaler.std[0] == doctest::Approx(1.0).epsilon(1e-15));
    // constant columns keep divisor one
    CHECK(scaler.mean[1] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(scaler.std[1] == 1.0);

    apply_scaler(scaler, train);
    CHECK(train[0].features[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(train[1].features[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(train[0].features[1] == doctest::Approx(0.0).epsilon(1e-15));
    // raw aggregates are untouched
    CHECK(train[0].rf_features[0] == 3.0);
    CHECK(train[0].target == 0.0);
}

TEST_CASE("scaling round-trips through the stored moments") {
    std::vector<Sample> samples = toy_samples(7, 1.3);
    const std::vector<Sample> original = samples;
    const Scaler scaler = fit_scaler(samples);
    apply_scaler(scaler, samples);
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            const double back = samples[i].features[j] * scaler.std[j] + scaler.mean[j];
            CHECK(back == doctest::Approx(original[i].features[j]).epsilon(1e-12));
        }
}

TEST_CASE("the scaler refuses singleton training sets") {
    std::vector<Sample> one = toy_samples(1, 1.0);
    CHECK_THROWS_AS(fit_scaler(one), DataError);
}

TEST_CASE("sample and scaler files round-trip exactly") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path("test_tmp_features");
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::vector<Sample> samples = toy_samples(5, 0.7);
    samples[2].features[100] = -1.25e-7;
    samples[3].rf_features[10] = 1e17;
    const std::string spath = (dir / "samples.csv").string();
    write_sample_file(spath, samples);
    const std::vector<Sample> back = read_sample_file(spath);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].scenario == samples[i].scenario);
        CHECK(back[i].features == samples[i].features);
        CHECK(back[i].rf_features == samples[i].rf_features);
        CHECK(back[i].target == samples[i].target);
    }

    const Scaler scaler = fit_scaler(samples);
    const std::string scpath = (dir / "scaler.csv").string();
    write_scaler_file(scpath, scaler);
    const Scaler sback = read_scaler_file(scpath);
    CHECK(sback.mean == scaler.mean);
    CHECK(sback.std == scaler.std);
    fs::remove_all(dir);
}
