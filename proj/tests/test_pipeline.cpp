#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrr/pipeline.hpp"

using namespace nrr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

datagen::SiteConfig tiny_site() {
    datagen::SiteConfig s;
    s.site_id = "tinysite";
    s.mean_temp = 14.0;
    s.temp_amplitude = 5.0;
    s.mean_radiation = 14.0;
    s.radiation_amplitude = 7.0;
    s.rain_prob_summer = 0.25;
    s.rain_prob_winter = 0.5;
    s.rain_mean_mm = 10.0;
    return s;
}

json tiny_site_json() {
    return {{"site_id", "tinysite"},     {"mean_temp", 14.0},
            {"temp_amplitude", 5.0},     {"mean_radiation", 14.0},
            {"radiation_amplitude", 7.0}, {"rain_prob_summer", 0.25},
            {"rain_prob_winter", 0.5},   {"rain_mean_mm", 10.0}};
}

// 32 scenarios, 16 labeled; default split routes 1987 to validation,
// 2012 to test and the rest to train
config::ExperimentConfig tiny_config(const fs::path& out) {
    config::ExperimentConfig cfg;
    cfg.master_seed = 42;
    cfg.seeds = {1};
    cfg.grid.sites = {tiny_site()};
    cfg.grid.soil_water_levels = {42};
    cfg.grid.soil_fertility_levels = {2};
    cfg.grid.irrigation_levels = {true, false};
    cfg.grid.years = {1987, 1993, 2000, 2012};
    cfg.grid.months = {1, 7};
    cfg.grid.days = {15};
    cfg.grid.n_amounts = {0, 20};
    cfg.out_dir = out.string();
    cfg.jobs = 1;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "test_tmp_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::string> tree_files(const fs::path& root, bool skip_logs) {
    std::vector<std::string> rel;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string r = fs::relative(entry.path(), root).generic_string();
        if (skip_logs && r.rfind("logs/", 0) == 0) continue;
        rel.push_back(r);
    }
    std::sort(rel.begin(), rel.end());
    return rel;
}

// byte-for-byte identity of two output trees; logs carry wall-clock times
// and are compared by file list only
void check_trees_identical(const fs::path& a, const fs::path& b) {
    const auto files_a = tree_files(a, true);
    const auto files_b = tree_files(b, true);
    CHECK(files_a == files_b);
    CHECK(tree_files(a, false) == tree_files(b, false));
    for (const std::string& r : files_a) {
        const bool same = slurp(a / r) == slurp(b / r);
        CHECK_MESSAGE(same, "file differs: ", r);
    }
}

std::vector<std::string> csv_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::string thrown_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config documents parse strictly") {
    json doc = {{"grid", {{"sites", json::array({tiny_site_json()})}}}};

    SUBCASE("defaults fill everything but the sites") {
        const config::ExperimentConfig cfg = config::parse_config(doc);
        CHECK(cfg.master_seed == 42);
        CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
        CHECK(cfg.model_kinds.size() == 4);
        CHECK(cfg.out_dir == "out");
        CHECK(cfg.jobs == 1);
        CHECK(cfg.grid.sites.size() == 1);
        CHECK(cfg.grid.soil_water_levels == std::vector<double>{42, 67, 110, 177});
        CHECK(cfg.grid.years.size() == 40);
        CHECK(cfg.grid.years.front() == 1979);
        CHECK(cfg.grid.years.back() == 2018);
        CHECK(cfg.split.validation_years == std::vector<int>{1979, 1987, 1999, 2007});
        CHECK_NOTHROW(cfg.validate());
    }

    SUBCASE("unknown keys are rejected by full path") {
        doc["grid"]["pwac"] = json::array({42});
        const std::string msg =
            thrown_message([&] { config::parse_config(doc); });
        CHECK(msg.find("grid.pwac") != std::string::npos);
        CHECK_THROWS_AS(config::parse_config(doc), ConfigError);
    }

    SUBCASE("unknown top level keys are rejected") {
        doc["grids"] = 1;
        const std::string msg =
            thrown_message([&] { config::parse_config(doc); });
        CHECK(msg.find("grids") != std::string::npos);
    }

    SUBCASE("missing required site keys are named") {
        doc["grid"]["sites"][0].erase("mean_temp");
        const std::string msg =
            thrown_message([&] { config::parse_config(doc); });
        CHECK(msg.find("mean_temp") != std::string::npos);
        CHECK_THROWS_AS(config::parse_config(doc), ConfigError);
    }

    SUBCASE("sites are required") {
        CHECK_THROWS_AS(config::parse_config(json::object()), ConfigError);
    }
}

TEST_CASE("seed lists accept ranges and reject duplicates") {
    CHECK(config::parse_seed_list("1..5") == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(config::parse_seed_list("7") == std::vector<std::uint64_t>{7});
    CHECK(config::parse_seed_list("1,3..5") == std::vector<std::uint64_t>{1, 3, 4, 5});
    CHECK_THROWS_AS(config::parse_seed_list("1,1"), ConfigError);
    CHECK_THROWS_AS(config::parse_seed_list("2,3..5,4"), ConfigError);
    CHECK_THROWS_AS(config::parse_seed_list("5..1"), ConfigError);
    CHECK_THROWS_AS(config::parse_seed_list("a"), ConfigError);
    CHECK_THROWS_AS(config::parse_seed_list(""), ConfigError);
}

TEST_CASE("model lists accept the shorthand and reject duplicates") {
    CHECK(config::parse_model_list("all") == models::all_model_kinds());
    const auto two = config::parse_model_list("rf,dae");
    REQUIRE(two.size() == 2);
    CHECK(two[0] == models::ModelKind::rf);
    CHECK(two[1] == models::ModelKind::dae);
    CHECK_THROWS_AS(config::parse_model_list("rf,rf"), ConfigError);
    CHECK_THROWS_AS(config::parse_model_list("cnn"), ConfigError);
}

TEST_CASE("the master seed env var overrides the file") {
    const fs::path dir = fresh_dir("env");
    const fs::path file = dir / "config.json";
    {
        std::ofstream out(file);
        out << json{{"master_seed", 42},
                    {"grid", {{"sites", json::array({tiny_site_json()})}}}}
                   .dump();
    }
    unsetenv("NRR_MASTER_SEED");
    CHECK(config::load_config(file.string()).master_seed == 42);
    setenv("NRR_MASTER_SEED", "77", 1);
    CHECK(config::load_config(file.string()).master_seed == 77);
    setenv("NRR_MASTER_SEED", "7x", 1);
    CHECK_THROWS_AS(config::load_config(file.string()), ConfigError);
    unsetenv("NRR_MASTER_SEED");
    CHECK(config::load_config(file.string()).master_seed == 42);
    CHECK_THROWS_AS(config::load_config((dir / "absent.json").string()), ConfigError);
}

TEST_CASE("the config hash tracks only the data-defining core") {
    const config::ExperimentConfig base = tiny_config("out-a");
    const std::uint64_t h = config::config_hash(base);
    CHECK(config::config_hash_hex(base).size() == 16);

    config::ExperimentConfig same = base;
    same.out_dir = "somewhere-else";
    same.jobs = 4;
    same.seeds = {9, 10};
    same.model_kinds = {models::ModelKind::dae};
    CHECK(config::config_hash(same) == h);

    config::ExperimentConfig reseeded = base;
    reseeded.master_seed = 43;
    CHECK(config::config_hash(reseeded) != h);

    config::ExperimentConfig regridded = base;
    regridded.grid.soil_water_levels.push_back(177);
    CHECK(config::config_hash(regridded) != h);

    config::ExperimentConfig resplit = base;
    resplit.split.test_years.push_back(1993);
    CHECK(config::config_hash(resplit) != h);

    config::ExperimentConfig retuned = base;
    retuned.constants.response_a0 += 1.0;
    CHECK(config::config_hash(retuned) != h);
}

TEST_CASE("stages refuse to run before their inputs exist or match") {
    const fs::path dir = fresh_dir("gating");
    const config::ExperimentConfig cfg = tiny_config(dir / "out");

    CHECK_THROWS_AS(pipeline::cmd_preprocess(cfg), StageError);
    CHECK_THROWS_AS(pipeline::cmd_train(cfg), StageError);
    CHECK_THROWS_AS(pipeline::cmd_evaluate(cfg), StageError);
    CHECK_THROWS_AS(pipeline::cmd_report(cfg), StageError);

    pipeline::cmd_generate(cfg);
    CHECK_THROWS_AS(pipeline::cmd_train(cfg), StageError);

    config::ExperimentConfig reseeded = cfg;
    reseeded.master_seed = 43;
    const std::string msg = thrown_message([&] { pipeline::cmd_preprocess(reseeded); });
    CHECK(msg.find("configuration") != std::string::npos);
    CHECK_THROWS_AS(pipeline::cmd_preprocess(reseeded), ConfigError);

    CHECK_NOTHROW(pipeline::cmd_preprocess(cfg));
}

TEST_CASE("run names and artifact paths are stable") {
    CHECK(pipeline::run_name(models::ModelKind::mlp, "waiotu", 3) == "mlp_waiotu_seed3");
    const config::ExperimentConfig cfg = tiny_config("out-x");
    const pipeline::Paths paths = pipeline::paths_for(cfg);
    CHECK(paths.model_file(models::ModelKind::rf, "tinysite", 1).filename().string() ==
          "rf_tinysite_seed1.model");
    CHECK(paths.run_file(models::ModelKind::ae, "tinysite", 2).filename().string() ==
          "ae_tinysite_seed2.csv");
    CHECK(paths.daily_file("tinysite").filename().string() == "daily_tinysite.csv");
    CHECK(paths.sample_file("tinysite", "test").filename().string() == "tinysite_test.csv");
}

TEST_CASE("the pipeline runs end to end and its outputs are reproducible") {
    const fs::path root = fresh_dir("endtoend");
    const config::ExperimentConfig cfg_a = tiny_config(root / "a");
    pipeline::run_all(cfg_a);
    const pipeline::Paths paths = pipeline::paths_for(cfg_a);
    const std::string site = "tinysite";

    SUBCASE("artifacts and manifest counts") {
        CHECK(fs::exists(paths.daily_file(site)));
        CHECK(fs::exists(paths.label_file(site)));
        for (const std::string part : {"train", "validation", "test"})
            CHECK(fs::exists(paths.sample_file(site, part)));
        CHECK(fs::exists(paths.scaler_file(site)));
        CHECK(fs::exists(paths.botrace_file(site)));
        CHECK(fs::exists(paths.rf_params_file(site)));
        for (models::ModelKind kind : cfg_a.model_kinds) {
            CHECK(fs::exists(paths.model_file(kind, site, 1)));
            CHECK(fs::exists(paths.run_file(kind, site, 1)));
            if (kind != models::ModelKind::rf)
                CHECK(fs::exists(paths.train_log_file(kind, site, 1)));
        }

        const json manifest = json::parse(slurp(paths.manifest()));
        CHECK(manifest.at("config_hash") == config::config_hash_hex(cfg_a));
        CHECK(manifest.at("master_seed") == 42);
        const json& stages = manifest.at("stages");
        for (const std::string stage :
             {"generate", "preprocess", "train", "evaluate", "report"}) {
            CHECK(stages.contains(stage));
            CHECK(stages.at(stage).at("config_hash") == config::config_hash_hex(cfg_a));
        }
        CHECK(stages.at("generate").at("scenarios") == 32);
        CHECK(stages.at("generate").at("labeled") == 16);
        const json& counts = stages.at("preprocess").at("sites").at(site);
        CHECK(counts.at("train") == 8);
        CHECK(counts.at("validation") == 4);
        CHECK(counts.at("test") == 4);
        CHECK(stages.at("train").at("runs").size() == 4);
        CHECK(stages.at("evaluate").at("runs").size() == 4);
    }

    SUBCASE("samples honor the year split") {
        auto years_of = [](const std::vector<features::Sample>& samples) {
            std::set<int> years;
            for (const features::Sample& s : samples) years.insert(s.scenario.fert_year);
            return years;
        };
        const auto train =
            features::read_sample_file(paths.sample_file(site, "train").string());
        const auto validation =
            features::read_sample_file(paths.sample_file(site, "validation").string());
        const auto test = features::read_sample_file(paths.sample_file(site, "test").string());
        CHECK(train.size() == 8);
        CHECK(validation.size() == 4);
        CHECK(test.size() == 4);
        CHECK(years_of(train) == std::set<int>{1993, 2000});
        CHECK(years_of(validation) == std::set<int>{1987});
        CHECK(years_of(test) == std::set<int>{2012});
        for (const features::Sample& s : train) CHECK(s.scenario.n_amount > 0.0);
    }

    SUBCASE("training logs follow the per-kind epoch counts") {
        const auto mlp_lines =
            csv_lines(paths.train_log_file(models::ModelKind::mlp, site, 1));
        REQUIRE(mlp_lines.size() == 102);  // header + 100 epochs + wall time
        CHECK(mlp_lines.front() == "stage,epoch,nrr,rec,total,validation");
        CHECK(mlp_lines.back().rfind("# wall_time_s=", 0) == 0);
        CHECK(csv_lines(paths.train_log_file(models::ModelKind::ae, site, 1)).size() == 122);
        CHECK(csv_lines(paths.train_log_file(models::ModelKind::dae, site, 1)).size() == 102);
    }

    SUBCASE("run files hold one prediction per test scenario") {
        const auto lines = csv_lines(paths.run_file(models::ModelKind::rf, site, 1));
        REQUIRE(lines.size() == 5);
        CHECK(lines.front() ==
              "site,pawc,soil_carbon,irrigated,fert_year,fert_month,fert_day,n_amount,"
              "prediction,target");
    }

    SUBCASE("reports cover every model, month and gate verdict") {
        CHECK(csv_lines(paths.reports() / "metrics.csv").size() == 5);
        CHECK(csv_lines(paths.reports() / "metrics_per_run.csv").size() == 5);
        CHECK(csv_lines(paths.reports() / "monthly.csv").size() == 49);
        CHECK(csv_lines(paths.reports() / "gate_months.csv").size() == 49);
        CHECK(csv_lines(paths.reports() / "gate.csv").size() == 5);

        const json report = json::parse(slurp(paths.reports() / "report.json"));
        CHECK(report.at("config_hash") == config::config_hash_hex(cfg_a));
        CHECK(report.at("threshold") == 5.0);
        CHECK(report.at("metrics").size() == 4);
        CHECK(report.at("metrics_per_run").size() == 4);
        CHECK(report.at("monthly").size() == 48);
        CHECK(report.at("gate").size() == 4);
        CHECK(report.at("gate")[0].at("months").size() == 12);
        CHECK(report.at("baseline").size() == 1);
        CHECK(report.at("baseline")[0].at("site") == site);
        CHECK(report.at("baseline")[0].at("mae").get<double>() > 0.0);
    }

    SUBCASE("a second run elsewhere produces identical bytes") {
        config::ExperimentConfig cfg_b = cfg_a;
        cfg_b.out_dir = (root / "b").string();
        pipeline::run_all(cfg_b);
        check_trees_identical(root / "a", root / "b");
    }

    SUBCASE("stage-by-stage equals the combined command") {
        config::ExperimentConfig cfg_c = cfg_a;
        cfg_c.out_dir = (root / "c").string();
        pipeline::cmd_generate(cfg_c);
        pipeline::cmd_preprocess(cfg_c);
        pipeline::cmd_train(cfg_c);
        pipeline::cmd_evaluate(cfg_c);
        pipeline::cmd_report(cfg_c);
        check_trees_identical(root / "a", root / "c");
    }

    SUBCASE("rerunning in place leaves the tree unchanged") {
        config::ExperimentConfig cfg_d = cfg_a;
        cfg_d.out_dir = (root / "d").string();
        pipeline::run_all(cfg_d);
        pipeline::run_all(cfg_d);
        check_trees_identical(root / "a", root / "d");
    }
}

TEST_CASE("evaluate names the first missing checkpoint") {
    const fs::path dir = fresh_dir("partial");
    config::ExperimentConfig cfg = tiny_config(dir / "out");
    cfg.seeds = {1, 2};
    cfg.model_kinds = {models::ModelKind::mlp};
    pipeline::cmd_generate(cfg);
    pipeline::cmd_preprocess(cfg);
    pipeline::cmd_train(cfg);
    const pipeline::Paths paths = pipeline::paths_for(cfg);
    CHECK(fs::exists(paths.model_file(models::ModelKind::mlp, "tinysite", 1)));
    CHECK(fs::exists(paths.model_file(models::ModelKind::mlp, "tinysite", 2)));

    config::ExperimentConfig all = cfg;
    all.model_kinds = models::all_model_kinds();
    const std::string msg = thrown_message([&] { pipeline::cmd_evaluate(all); });
    CHECK(msg.find("rf_tinysite_seed1") != std::string::npos);
    CHECK_THROWS_AS(pipeline::cmd_evaluate(all), StageError);

    CHECK_NOTHROW(pipeline::cmd_evaluate(cfg));
    CHECK_NOTHROW(pipeline::cmd_report(cfg));
    const json manifest = json::parse(slurp(paths.manifest()));
    CHECK(manifest.at("stages").at("train").at("runs").size() == 2);
}
