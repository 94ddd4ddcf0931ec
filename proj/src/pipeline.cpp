#include "nrr/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrr/eval.hpp"
#include "nrr/forest.hpp"
#include "nrr/rng.hpp"
#include "nrr/textio.hpp"

namespace nrr::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Paths paths_for(const config::ExperimentConfig& cfg) { return Paths{fs::path(cfg.out_dir)}; }

std::string run_name(models::ModelKind kind, const std::string& site, std::uint64_t seed) {
    return models::to_string(kind) + "_" + site + "_seed" + std::to_string(seed);
}

fs::path Paths::daily_file(const std::string& site) const {
    return data() / ("daily_" + site + ".csv");
}
fs::path Paths::label_file(const std::string& site) const {
    return data() / ("labels_" + site + ".csv");
}
fs::path Paths::sample_file(const std::string& site, const std::string& part) const {
    return samples() / (site + "_" + part + ".csv");
}
fs::path Paths::scaler_file(const std::string& site) const {
    return samples() / ("scaler_" + site + ".csv");
}
fs::path Paths::model_file(models::ModelKind kind, const std::string& site,
                           std::uint64_t seed) const {
    return models() / (run_name(kind, site, seed) + ".model");
}
fs::path Paths::train_log_file(models::ModelKind kind, const std::string& site,
                               std::uint64_t seed) const {
    return logs() / (run_name(kind, site, seed) + ".csv");
}
fs::path Paths::botrace_file(const std::string& site) const {
    return logs() / ("botrace_" + site + ".csv");
}
fs::path Paths::rf_params_file(const std::string& site) const {
    return models() / ("rf_params_" + site + ".json");
}
fs::path Paths::run_file(models::ModelKind kind, const std::string& site,
                         std::uint64_t seed) const {
    return runs() / (run_name(kind, site, seed) + ".csv");
}

namespace {

// ---- manifest ------------------------------------------------------------

json read_manifest(const Paths& paths) {
    std::error_code ec;
    if (!fs::exists(paths.manifest(), ec)) return json::object();
    try {
        return json::parse(read_text_file(paths.manifest().string()));
    } catch (const json::exception& e) {
        throw DataError("manifest " + paths.manifest().string() + " is corrupt: " + e.what());
    }
}

void write_manifest(const Paths& paths, const json& manifest) {
    std::ofstream out(paths.manifest(), std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + paths.manifest().string());
    out << manifest.dump(2) << "\n";
    out.close();
    if (!out) throw DataError("write failed: " + paths.manifest().string());
}

void record_stage(const config::ExperimentConfig& cfg, const Paths& paths,
                  const std::string& stage, json entry) {
    json manifest = read_manifest(paths);
    const std::string hash = config::config_hash_hex(cfg);
    manifest["config_hash"] = hash;
    manifest["master_seed"] = cfg.master_seed;
    entry["config_hash"] = hash;
    if (!manifest.contains("stages") || !manifest["stages"].is_object())
        manifest["stages"] = json::object();
    manifest["stages"][stage] = std::move(entry);
    write_manifest(paths, manifest);
}

/// The recorded entry of `needed`, verified to exist and to carry the
/// current config hash.
json require_stage(const config::ExperimentConfig& cfg, const Paths& paths,
                   const std::string& needed, const std::string& current) {
    const json manifest = read_manifest(paths);
    if (!manifest.contains("stages") || !manifest.at("stages").contains(needed))
        throw StageError("stage " + current + " needs the outputs of stage " + needed + " in " +
                         paths.root.string() + "; run " + needed + " first");
    const json& entry = manifest.at("stages").at(needed);
    const std::string expect = config::config_hash_hex(cfg);
    const std::string got = entry.value("config_hash", "");
    if (got != expect)
        throw ConfigError("stage " + needed + " in " + paths.root.string() +
                          " was produced by a different configuration (hash " + got +
                          ", current " + expect + "); re-run it before " + current);
    return entry;
}

// prior recorded run names of `stage`, kept only when the hash still matches
std::set<std::string> previous_runs(const Paths& paths, const std::string& stage,
                                    const std::string& hash) {
    std::set<std::string> out;
    const json manifest = read_manifest(paths);
    if (!manifest.contains("stages") || !manifest.at("stages").contains(stage)) return out;
    const json& entry = manifest.at("stages").at(stage);
    if (entry.value("config_hash", "") != hash || !entry.contains("runs")) return out;
    for (const json& r : entry.at("runs"))
        if (r.is_string()) out.insert(r.get<std::string>());
    return out;
}

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
    try {
        return fn();
    } catch (const ModelError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelError(what + " failed: " + e.what());
    }
}

std::uint64_t run_seed(const config::ExperimentConfig& cfg, models::ModelKind kind,
                       const std::string& site, std::uint64_t seed) {
    return StreamKey(cfg.master_seed)
        .add("run")
        .add(models::to_string(kind))
        .add(site)
        .add(seed)
        .value();
}

// ---- generate ------------------------------------------------------------

struct GenerateCounts {
    std::size_t scenarios = 0;
    std::size_t labeled = 0;
};

GenerateCounts generate_site(const config::ExperimentConfig& cfg, const Paths& paths,
                             const datagen::SiteConfig& site,
                             const std::vector<datagen::Scenario>& scenarios) {
    int first_year = cfg.grid.years.front();
    int last_year = first_year;
    for (int y : cfg.grid.years) {
        first_year = std::min(first_year, y);
        last_year = std::max(last_year, y);
    }
    const datagen::WeatherSeries weather = datagen::synthesize_weather_for_years(
        site, first_year, last_year, cfg.master_seed, cfg.constants);

    CsvWriter daily(paths.daily_file(site.site_id).string());
    daily.row(datagen::daily_file_header());
    CsvWriter labels(paths.label_file(site.site_id).string());
    labels.row(datagen::label_file_header());

    GenerateCounts counts;
    counts.scenarios = scenarios.size();
    constexpr std::size_t kChunk = 1024;  // bounds memory on study-scale grids
    std::vector<datagen::SimulationResult> chunk;
    for (std::size_t base = 0; base < scenarios.size(); base += kChunk) {
        const std::size_t n = std::min(kChunk, scenarios.size() - base);
        chunk.assign(n, datagen::SimulationResult{});
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
            chunk[i] = datagen::simulate(scenarios[base + i], weather, cfg.master_seed,
                                         cfg.constants);
        });
        for (const datagen::SimulationResult& r : chunk) {
            const std::vector<std::string> key = datagen::scenario_fields(r.scenario);
            for (const datagen::DailyRecord& rec : r.daily) {
                std::vector<std::string> row = key;
                row.push_back(rec.date.iso());
                for (int c = 0; c < datagen::kDailyChannels; ++c)
                    row.push_back(format_double(rec.channel(c)));
                daily.row(row);
            }
            if (r.nrr) {
                std::vector<std::string> row = key;
                row.push_back(format_double(*r.nrr));
                labels.row(row);
                ++counts.labeled;
            }
        }
    }
    daily.close();
    labels.close();
    return counts;
}

// ---- train helpers -------------------------------------------------------

forest::RfData rf_dataset(const std::vector<features::Sample>& train,
                          const std::vector<features::Sample>& validation) {
    forest::RfData data;
    data.n_features = features::kRfFeatureCount;
    const auto append = [&](const std::vector<features::Sample>& part) {
        for (const features::Sample& s : part) {
            data.x.insert(data.x.end(), s.rf_features.begin(), s.rf_features.end());
            data.y.push_back(s.target);
        }
    };
    append(train);
    append(validation);
    return data;
}

void write_botrace(const fs::path& path, const forest::BoTrace& trace) {
    CsvWriter out(path.string());
    out.row({"step", "n_estimators", "max_depth", "min_samples_split", "min_samples_leaf",
             "cv_mae", "incumbent_mae"});
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const forest::BoStep& s = trace.steps[i];
        out.row({std::to_string(i + 1), std::to_string(s.params.n_estimators),
                 std::to_string(s.params.max_depth), std::to_string(s.params.min_samples_split),
                 std::to_string(s.params.min_samples_leaf), format_double(s.cv_mae),
                 format_double(s.incumbent_mae)});
    }
    out.close();
}

void write_rf_params(const fs::path& path, const std::string& site,
                     const forest::BoTrace& trace) {
    const json doc{{"site", site},
                   {"n_estimators", trace.best.n_estimators},
                   {"max_depth", trace.best.max_depth},
                   {"min_samples_split", trace.best.min_samples_split},
                   {"min_samples_leaf", trace.best.min_samples_leaf},
                   {"max_features_fraction", trace.best.max_features_fraction},
                   {"cv_mae", trace.best_mae}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
    out.close();
    if (!out) throw DataError("write failed: " + path.string());
}

void write_train_log(const fs::path& path, const models::TrainLog& log) {
    CsvWriter out(path.string());
    out.row({"stage", "epoch", "nrr", "rec", "total", "validation"});
    for (const models::TrainLog::Epoch& e : log.epochs)
        out.row({std::to_string(e.stage), std::to_string(e.epoch), format_double(e.nrr),
                 format_double(e.rec), format_double(e.total), format_double(e.validation)});
    out.comment("wall_time_s=" + format_double(log.wall_seconds));
    out.close();
}

void train_rf_site(const config::ExperimentConfig& cfg, const Paths& paths,
                   const std::string& site, const std::vector<features::Sample>& train,
                   const std::vector<features::Sample>& validation,
                   std::vector<std::string>& trained) {
    const forest::RfData data = rf_dataset(train, validation);
    const std::uint64_t bo_seed = StreamKey(cfg.master_seed).add("tune").add("rf").add(site).value();
    const forest::BoTrace trace = guarded("rf tuning on site " + site, [&] {
        return forest::bayes_opt(data, forest::RfBounds{}, 25, bo_seed, cfg.jobs);
    });
    write_botrace(paths.botrace_file(site), trace);
    write_rf_params(paths.rf_params_file(site), site, trace);
    for (std::uint64_t seed : cfg.seeds) {
        const std::string name = run_name(models::ModelKind::rf, site, seed);
        const forest::ForestModel model = guarded(name, [&] {
            return forest::fit_forest(data, trace.best,
                                      run_seed(cfg, models::ModelKind::rf, site, seed), cfg.jobs);
        });
        forest::save_forest(paths.model_file(models::ModelKind::rf, site, seed).string(), model);
        trained.push_back(name);
    }
}

void train_nn_site(const config::ExperimentConfig& cfg, const Paths& paths,
                   models::ModelKind kind, const std::string& site,
                   const std::vector<features::Sample>& train,
                   const std::vector<features::Sample>& validation,
                   std::vector<std::string>& trained) {
    const std::size_t n = cfg.seeds.size();
    std::vector<models::TrainOutcome> outcomes(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const std::string name = run_name(kind, site, cfg.seeds[i]);
        const std::uint64_t rs = run_seed(cfg, kind, site, cfg.seeds[i]);
        outcomes[i] = guarded(name, [&] {
            switch (kind) {
                case models::ModelKind::mlp:
                    return models::train_mlp(models::MlpSpec{}, train, validation, rs);
                case models::ModelKind::ae:
                    return models::train_ae_two_stage(models::AeSpec{}, train, validation, rs);
                case models::ModelKind::dae:
                    return models::train_dae(models::DaeSpec{}, train, validation, rs);
                default:
                    throw UsageError("train_nn_site: not a neural model kind");
            }
        });
    });
    for (std::size_t i = 0; i < n; ++i) {
        models::save_model(paths.model_file(kind, site, cfg.seeds[i]).string(),
                           outcomes[i].model);
        write_train_log(paths.train_log_file(kind, site, cfg.seeds[i]), outcomes[i].log);
        trained.push_back(run_name(kind, site, cfg.seeds[i]));
    }
}

// ---- run files -----------------------------------------------------------

std::vector<std::string> run_file_header() {
    return {"site",      "pawc",       "soil_carbon", "irrigated", "fert_year",
            "fert_month", "fert_day",  "n_amount",    "prediction", "target"};
}

void write_run_file(const fs::path& path, const std::vector<features::Sample>& test,
                    const std::vector<double>& preds) {
    CsvWriter out(path.string());
    out.row(run_file_header());
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::vector<std::string> row = datagen::scenario_fields(test[i].scenario);
        row.push_back(format_double(preds[i]));
        row.push_back(format_double(test[i].target));
        out.row(row);
    }
    out.close();
}

eval::RunResult read_run_file(const fs::path& path, models::ModelKind kind,
                              const std::string& site, std::uint64_t seed) {
    CsvReader in(path.string());
    if (in.header() != run_file_header())
        throw DataError("unexpected header in " + path.string());
    eval::RunResult rr;
    rr.kind = kind;
    rr.site = site;
    rr.seed = seed;
    std::vector<std::string> fields;
    while (in.row(fields)) {
        eval::PredictionRow row;
        row.scenario = datagen::parse_scenario_fields(fields);
        row.prediction = parse_double(fields[datagen::kScenarioFieldCount]);
        row.target = parse_double(fields[datagen::kScenarioFieldCount + 1]);
        rr.rows.push_back(std::move(row));
    }
    return rr;
}

void require_sample_files(const Paths& paths, const std::string& site) {
    for (const char* part : {"train", "validation", "test"}) {
        const fs::path p = paths.sample_file(site, part);
        if (!fs::exists(p))
            throw StageError("sample file " + p.string() + " missing; run preprocess first");
    }
}

}  // namespace

// ---- stages ----------------------------------------------------------------

void cmd_generate(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const Paths paths = paths_for(cfg);
    fs::create_directories(paths.data());

    const std::vector<datagen::Scenario> all = datagen::enumerate_scenarios(cfg.grid);
    json sites_entry = json::object();
    std::size_t labeled_total = 0;
    for (const datagen::SiteConfig& site : cfg.grid.sites) {
        std::vector<datagen::Scenario> mine;
        for (const datagen::Scenario& s : all)
            if (s.site_id == site.site_id) mine.push_back(s);
        const GenerateCounts counts = generate_site(cfg, paths, site, mine);
        sites_entry[site.site_id] = {{"scenarios", counts.scenarios},
                                     {"labeled", counts.labeled}};
        labeled_total += counts.labeled;
    }
    record_stage(cfg, paths, "generate",
                 json{{"scenarios", all.size()},
                      {"labeled", labeled_total},
                      {"sites", sites_entry}});
}

void cmd_preprocess(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const Paths paths = paths_for(cfg);
    require_stage(cfg, paths, "generate", "preprocess");
    fs::create_directories(paths.samples());

    json sites_entry = json::object();
    for (const datagen::SiteConfig& site : cfg.grid.sites) {
        const std::string& sid = site.site_id;
        const fs::path daily = paths.daily_file(sid);
        const fs::path labels = paths.label_file(sid);
        if (!fs::exists(daily) || !fs::exists(labels))
            throw StageError("dataset files for site " + sid + " missing; run generate first");
        std::vector<datagen::SimulationResult> results =
            datagen::read_daily_file(daily.string());
        datagen::read_label_file(labels.string(), results);
        const std::vector<features::Sample> samples = features::make_samples(results);
        features::SplitSamples split = features::split_by_year(samples, cfg.split);
        const features::Scaler scaler = features::fit_scaler(split.train);
        features::apply_scaler(scaler, split.train);
        features::apply_scaler(scaler, split.validation);
        features::apply_scaler(scaler, split.test);
        features::write_sample_file(paths.sample_file(sid, "train").string(), split.train);
        features::write_sample_file(paths.sample_file(sid, "validation").string(),
                                    split.validation);
        features::write_sample_file(paths.sample_file(sid, "test").string(), split.test);
        features::write_scaler_file(paths.scaler_file(sid).string(), scaler);
        sites_entry[sid] = {{"train", split.train.size()},
                            {"validation", split.validation.size()},
                            {"test", split.test.size()}};
    }
    record_stage(cfg, paths, "preprocess", json{{"sites", sites_entry}});
}

void cmd_train(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const Paths paths = paths_for(cfg);
    require_stage(cfg, paths, "preprocess", "train");
    fs::create_directories(paths.models());
    fs::create_directories(paths.logs());

    std::vector<std::string> trained;
    for (const datagen::SiteConfig& site : cfg.grid.sites) {
        const std::string& sid = site.site_id;
        require_sample_files(paths, sid);
        const std::vector<features::Sample> train =
            features::read_sample_file(paths.sample_file(sid, "train").string());
        const std::vector<features::Sample> validation =
            features::read_sample_file(paths.sample_file(sid, "validation").string());
        for (models::ModelKind kind : cfg.model_kinds) {
            if (kind == models::ModelKind::rf)
                train_rf_site(cfg, paths, sid, train, validation, trained);
            else
                train_nn_site(cfg, paths, kind, sid, train, validation, trained);
        }
    }

    std::set<std::string> runs =
        previous_runs(paths, "train", config::config_hash_hex(cfg));
    runs.insert(trained.begin(), trained.end());
    record_stage(cfg, paths, "train",
                 json{{"runs", std::vector<std::string>(runs.begin(), runs.end())}});
}

void cmd_evaluate(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const Paths paths = paths_for(cfg);
    require_stage(cfg, paths, "preprocess", "evaluate");
    require_stage(cfg, paths, "train", "evaluate");
    fs::create_directories(paths.runs());

    std::vector<std::string> evaluated;
    for (const datagen::SiteConfig& site : cfg.grid.sites) {
        const std::string& sid = site.site_id;
        require_sample_files(paths, sid);
        const std::vector<features::Sample> test =
            features::read_sample_file(paths.sample_file(sid, "test").string());
        for (models::ModelKind kind : cfg.model_kinds) {
            for (std::uint64_t seed : cfg.seeds) {
                const fs::path mpath = paths.model_file(kind, sid, seed);
                if (!fs::exists(mpath))
                    throw StageError("checkpoint " + mpath.string() +
                                     " missing; run train first");
                const std::string name = run_name(kind, sid, seed);
                const std::vector<double> preds = guarded(name, [&] {
                    if (kind == models::ModelKind::rf) {
                        const forest::ForestModel fm = forest::load_forest(mpath.string());
                        std::vector<double> p(test.size());
                        for (std::size_t i = 0; i < test.size(); ++i)
                            p[i] = fm.predict(test[i].rf_features.data());
                        return p;
                    }
                    const models::TrainedModel tm = models::load_model(mpath.string());
                    return models::predict(tm, test);
                });
                write_run_file(paths.run_file(kind, sid, seed), test, preds);
                evaluated.push_back(name);
            }
        }
    }

    std::set<std::string> runs =
        previous_runs(paths, "evaluate", config::config_hash_hex(cfg));
    runs.insert(evaluated.begin(), evaluated.end());
    record_stage(cfg, paths, "evaluate",
                 json{{"runs", std::vector<std::string>(runs.begin(), runs.end())}});
}

void cmd_report(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const Paths paths = paths_for(cfg);
    require_stage(cfg, paths, "evaluate", "report");
    fs::create_directories(paths.reports());

    CsvWriter metrics((paths.reports() / "metrics.csv").string());
    metrics.row({"model", "site", "mae", "r2", "sigma"});
    CsvWriter per_run((paths.reports() / "metrics_per_run.csv").string());
    per_run.row({"model", "site", "seed", "mae", "r2"});
    CsvWriter monthly((paths.reports() / "monthly.csv").string());
    monthly.row({"model", "site", "month", "p0", "q25", "q50", "q75", "p100", "count"});
    CsvWriter gate_months((paths.reports() / "gate_months.csv").string());
    gate_months.row({"model", "site", "month", "q75", "pass"});
    CsvWriter gate((paths.reports() / "gate.csv").string());
    gate.row({"model", "site", "threshold", "operational"});

    json jmetrics = json::array();
    json jper_run = json::array();
    json jmonthly = json::array();
    json jgate = json::array();

    for (models::ModelKind kind : cfg.model_kinds) {
        const std::string kname = models::to_string(kind);
        for (const datagen::SiteConfig& site : cfg.grid.sites) {
            const std::string& sid = site.site_id;
            std::vector<eval::RunResult> runs;
            for (std::uint64_t seed : cfg.seeds) {
                const fs::path rpath = paths.run_file(kind, sid, seed);
                if (!fs::exists(rpath))
                    throw StageError("run file " + rpath.string() +
                                     " missing; run evaluate first");
                runs.push_back(read_run_file(rpath, kind, sid, seed));
            }

            const eval::MetricsRow m = eval::aggregate_metrics(runs);
            metrics.row({kname, sid, format_double(m.mae), format_double(m.r2),
                         format_double(m.sigma)});
            jmetrics.push_back({{"model", kname},
                                {"site", sid},
                                {"mae", m.mae},
                                {"r2", m.r2},
                                {"sigma", m.sigma}});
            for (const eval::RunResult& run : runs) {
                const eval::MetricsRow rm = eval::single_run_metrics(run);
                per_run.row({kname, sid, std::to_string(run.seed), format_double(rm.mae),
                             format_double(rm.r2)});
                jper_run.push_back({{"model", kname},
                                    {"site", sid},
                                    {"seed", run.seed},
                                    {"mae", rm.mae},
                                    {"r2", rm.r2}});
            }

            const std::array<eval::MonthlyResidualStats, 12> stats =
                eval::monthly_residual_stats(runs);
            for (const eval::MonthlyResidualStats& st : stats) {
                monthly.row({kname, sid, std::to_string(st.month), format_double(st.p0),
                             format_double(st.q25), format_double(st.q50),
                             format_double(st.q75), format_double(st.p100),
                             std::to_string(st.count)});
                jmonthly.push_back({{"model", kname},
                                    {"site", sid},
                                    {"month", st.month},
                                    {"p0", st.p0},
                                    {"q25", st.q25},
                                    {"q50", st.q50},
                                    {"q75", st.q75},
                                    {"p100", st.p100},
                                    {"count", st.count}});
            }

            const eval::GateVerdict verdict = eval::operational_gate(kind, sid, stats);
            json jmonths = json::array();
            for (std::size_t mi = 0; mi < 12; ++mi) {
                gate_months.row({kname, sid, std::to_string(mi + 1),
                                 format_double(stats[mi].q75),
                                 verdict.month_pass[mi] ? "1" : "0"});
                jmonths.push_back({{"month", mi + 1},
                                   {"q75", stats[mi].q75},
                                   {"pass", verdict.month_pass[mi]}});
            }
            gate.row({kname, sid, format_double(verdict.threshold),
                      verdict.overall ? "1" : "0"});
            jgate.push_back({{"model", kname},
                             {"site", sid},
                             {"threshold", verdict.threshold},
                             {"operational", verdict.overall},
                             {"months", jmonths}});
        }
    }

    metrics.close();
    per_run.close();
    monthly.close();
    gate_months.close();
    gate.close();

    // train-mean reference per site, for judging the learned models
    json jbaseline = json::array();
    for (const datagen::SiteConfig& site : cfg.grid.sites) {
        const std::string& sid = site.site_id;
        require_sample_files(paths, sid);
        const std::vector<features::Sample> train =
            features::read_sample_file(paths.sample_file(sid, "train").string());
        const std::vector<features::Sample> test =
            features::read_sample_file(paths.sample_file(sid, "test").string());
        if (train.empty() || test.empty())
            throw DataError("baseline for site " + sid + " needs train and test rows");
        double mean = 0.0;
        for (const features::Sample& s : train) mean += s.target;
        mean /= static_cast<double>(train.size());
        std::vector<double> preds(test.size(), mean);
        std::vector<double> targets;
        for (const features::Sample& s : test) targets.push_back(s.target);
        jbaseline.push_back(
            {{"site", sid}, {"train_mean", mean}, {"mae", eval::mae(preds, targets)}});
    }

    const json report{{"config_hash", config::config_hash_hex(cfg)},
                      {"threshold", eval::kGateThreshold},
                      {"metrics", jmetrics},
                      {"metrics_per_run", jper_run},
                      {"monthly", jmonthly},
                      {"gate", jgate},
                      {"baseline", jbaseline}};
    std::ofstream out(paths.reports() / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write report.json");
    out << report.dump(2) << "\n";
    out.close();
    if (!out) throw DataError("write failed: report.json");

    json sites_list = json::array();
    for (const datagen::SiteConfig& site : cfg.grid.sites) sites_list.push_back(site.site_id);
    json models_list = json::array();
    for (models::ModelKind kind : cfg.model_kinds) models_list.push_back(models::to_string(kind));
    record_stage(cfg, paths, "report", json{{"models", models_list}, {"sites", sites_list}});
}

void run_all(const config::ExperimentConfig& cfg) {
    cmd_generate(cfg);
    cmd_preprocess(cfg);
    cmd_train(cfg);
    cmd_evaluate(cfg);
    cmd_report(cfg);
}

}  // namespace nrr::pipeline
