#include "nrr/features.hpp"

#include <algorithm>
#include <cmath>

#include "nrr/textio.hpp"

namespace nrr::features {

std::vector<datagen::DailyRecord> extract_window(const datagen::SimulationResult& result) {
    const Date fert = result.scenario.fert_date();
    const Date first = fert.plus_days(-static_cast<std::int64_t>(kWindowDays));
    std::vector<datagen::DailyRecord> window;
    window.reserve(kWindowDays);
    for (const datagen::DailyRecord& rec : result.daily) {
        if (rec.date < first || rec.date >= fert) continue;
        window.push_back(rec);
    }
    if (window.size() != kWindowDays)
        throw DataError("simulation does not cover the 28 days before fertilization");
    for (std::size_t i = 1; i < window.size(); ++i)
        if (window[i].date.serial() != window[i - 1].date.serial() + 1)
            throw DataError("feature window has gaps");
    return window;
}

namespace {

std::vector<double> static_features(const datagen::Scenario& s) {
    return {s.n_amount, static_cast<double>(s.fert_month) / 12.0, s.irrigated ? 1.0 : 0.0,
            s.pawc, s.soil_carbon};
}

}  // namespace

std::vector<double> assemble_features(std::span<const datagen::DailyRecord> window,
                                      const datagen::Scenario& scenario) {
    if (window.size() != kWindowDays) throw StructuralError("feature window must be 28 days");
    std::vector<double> out;
    out.reserve(kFeatureCount);
    for (std::size_t day = 0; day < kWindowDays; ++day)
        for (int c = 0; c < datagen::kDailyChannels; ++c)
            out.push_back(window[day].channel(c));
    for (double v : static_features(scenario)) out.push_back(v);
    return out;
}

std::vector<double> weekly_aggregate(std::span<const datagen::DailyRecord> window,
                                     const datagen::Scenario& scenario) {
    if (window.size() != kWindowDays) throw StructuralError("feature window must be 28 days");
    std::vector<double> out;
    out.reserve(kRfFeatureCount);
    for (std::size_t week = 0; week < kWeeks; ++week) {
        for (int c = 0; c < datagen::kDailyChannels; ++c) {
            double sum = 0.0;
            for (std::size_t d = week * 7; d < (week + 1) * 7; ++d)
                sum += window[d].channel(c);
            out.push_back(sum / 7.0);
        }
    }
    for (double v : static_features(scenario)) out.push_back(v);
    return out;
}

std::vector<Sample> make_samples(const std::vector<datagen::SimulationResult>& results) {
    std::vector<Sample> samples;
    for (const datagen::SimulationResult& r : results) {
        if (!r.nrr) continue;
        const std::vector<datagen::DailyRecord> window = extract_window(r);
        Sample s;
        s.scenario = r.scenario;
        s.features = assemble_features(window, r.scenario);
        s.rf_features = weekly_aggregate(window, r.scenario);
        s.target = *r.nrr;
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<int> SplitSpec::default_test_years() {
    std::vector<int> ys;
    for (int y = 2011; y <= 2018; ++y) ys.push_back(y);
    return ys;
}

void SplitSpec::validate() const {
    for (int y : validation_years)
        if (std::find(test_years.begin(), test_years.end(), y) != test_years.end())
            throw ConfigError("year " + std::to_string(y) + " is in both validation and test sets");
}

SplitSpec::Part SplitSpec::part_of(int year) const {
    const bool in_val =
        std::find(validation_years.begin(), validation_years.end(), year) != validation_years.end();
    const bool in_test = std::find(test_years.begin(), test_years.end(), year) != test_years.end();
    if (in_val && in_test)
        throw ConfigError("year " + std::to_string(year) + " is in both validation and test sets");
    if (in_val) return Part::validation;
    if (in_test) return Part::test;
    return Part::train;
}

SplitSamples split_by_year(const std::vector<Sample>& samples, const SplitSpec& spec) {
    spec.validate();
    SplitSamples out;
    for (const Sample& s : samples) {
        switch (spec.part_of(s.scenario.fert_year)) {
            case SplitSpec::Part::train: out.train.push_back(s); break;
            case SplitSpec::Part::validation: out.validation.push_back(s); break;
            case SplitSpec::Part::test: out.test.push_back(s); break;
        }
    }
    return out;
}

Scaler fit_scaler(const std::vector<Sample>& train) {
    if (train.size() < 2) throw DataError("scaler needs at least 2 training rows");
    const std::size_t width = train.front().features.size();
    Scaler scaler;
    scaler.mean.assign(width, 0.0);
    scaler.std.assign(width, 0.0);
    for (const Sample& s : train) {
        if (s.features.size() != width) throw StructuralError("inconsistent feature widths");
        for (std::size_t j = 0; j < width; ++j) scaler.mean[j] += s.features[j];
    }
    const double n = static_cast<double>(train.size());
    for (double& m : scaler.mean) m /= n;
    for (const Sample& s : train)
        for (std::size_t j = 0; j < width; ++j) {
            const double d = s.features[j] - scaler.mean[j];
            scaler.std[j] += d * d;
        }
    for (double& v : scaler.std) {
        v = std::sqrt(v / n);
        if (v == 0.0) v = 1.0;  // constant feature: center only
    }
    return scaler;
}

void apply_scaler(const Scaler& scaler, std::vector<Sample>& samples) {
    for (Sample& s : samples) {
        if (s.features.size() != scaler.mean.size())
            throw StructuralError("scaler width does not match features");
        for (std::size_t j = 0; j < s.features.size(); ++j)
            s.features[j] = (s.features[j] - scaler.mean[j]) / scaler.std[j];
    }
}

// ---- sample files -------------------------------------------------------

namespace {

std::vector<std::string> sample_file_header() {
    std::vector<std::string> h = {"site",      "pawc",       "soil_carbon", "irrigated",
                                  "fert_year", "fert_month", "fert_day",    "n_amount",
                                  "nrr"};
    for (std::size_t j = 0; j < kFeatureCount; ++j) h.push_back("f" + std::to_string(j));
    for (std::size_t j = 0; j < kRfFeatureCount; ++j) h.push_back("w" + std::to_string(j));
    return h;
}

}  // namespace

void write_sample_file(const std::string& path, const std::vector<Sample>& samples) {
    CsvWriter out(path);
    out.row(sample_file_header());
    for (const Sample& s : samples) {
        std::vector<std::string> row = {s.scenario.site_id,
                                        format_double(s.scenario.pawc),
                                        format_double(s.scenario.soil_carbon),
                                        s.scenario.irrigated ? "1" : "0",
                                        std::to_string(s.scenario.fert_year),
                                        std::to_string(s.scenario.fert_month),
                                        std::to_string(s.scenario.fert_day),
                                        format_double(s.scenario.n_amount),
                                        format_double(s.target)};
        for (double v : s.features) row.push_back(format_double(v));
        for (double v : s.rf_features) row.push_back(format_double(v));
        out.row(row);
    }
    out.close();
}

std::vector<Sample> read_sample_file(const std::string& path) {
    CsvReader in(path);
    if (in.header() != sample_file_header()) throw DataError("unexpected header in " + path);
    std::vector<Sample> samples;
    std::vector<std::string> f;
    while (in.row(f)) {
        Sample s;
        s.scenario.site_id = f[0];
        s.scenario.pawc = parse_double(f[1]);
        s.scenario.soil_carbon = parse_double(f[2]);
        s.scenario.irrigated = f[3] == "1";
        s.scenario.fert_year = static_cast<int>(parse_int(f[4]));
        s.scenario.fert_month = static_cast<int>(parse_int(f[5]));
        s.scenario.fert_day = static_cast<int>(parse_int(f[6]));
        s.scenario.n_amount = parse_double(f[7]);
        s.target = parse_double(f[8]);
        s.features.reserve(kFeatureCount);
        for (std::size_t j = 0; j < kFeatureCount; ++j) s.features.push_back(parse_double(f[9 + j]));
        s.rf_features.reserve(kRfFeatureCount);
        for (std::size_t j = 0; j < kRfFeatureCount; ++j)
            s.rf_features.push_back(parse_double(f[9 + kFeatureCount + j]));
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_scaler_file(const std::string& path, const Scaler& scaler) {
    CsvWriter out(path);
    out.row({"index", "mean", "std"});
    for (std::size_t j = 0; j < scaler.mean.size(); ++j)
        out.row({std::to_string(j), format_double(scaler.mean[j]), format_double(scaler.std[j])});
    out.close();
}

Scaler read_scaler_file(const std::string& path) {
    CsvReader in(path);
    Scaler scaler;
    std::vector<std::string> f;
    const std::size_t idx_col = in.column("index");
    const std::size_t mean_col = in.column("mean");
    const std::size_t std_col = in.column("std");
    while (in.row(f)) {
        const std::size_t j = static_cast<std::size_t>(parse_int(f[idx_col]));
        if (j != scaler.mean.size()) throw DataError("scaler rows out of order in " + path);
        scaler.mean.push_back(parse_double(f[mean_col]));
        scaler.std.push_back(parse_double(f[std_col]));
    }
    return scaler;
}

}  // namespace nrr::features
