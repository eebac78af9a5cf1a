#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lstmcov/errors.hpp"
#include "lstmcov/experiment.hpp"
#include "lstmcov/report.hpp"
#include "support.hpp"

using namespace lstmcov;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const TsfDataset> small_hospital() {
    auto records = testing::surrogate_records("hospital", 4);
    records.resize(24);
    return std::make_shared<const TsfDataset>(testing::as_tsf("hospital", std::move(records), 12, 12, 15));
}

ExperimentSpec quick_spec(ModelKind model, std::size_t k, std::uint64_t seed) {
    auto s = ExperimentSpec::make("hospital", model, k, seed);
    s.train.epochs = 2;
    s.train.batches_per_epoch = 2;
    s.train.batch_size = 8;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    REQUIRE(it != header.end());
    return static_cast<std::size_t>(it - header.begin());
}

ResultRow sample_row(std::string dataset, std::size_t k, double pcc, std::uint64_t seed, double smape_value) {
    ResultRow r;
    r.dataset = std::move(dataset);
    r.model = "base_lstm";
    r.k = k;
    r.gamma = k ? 0.3 : 0.0;
    r.mean_pcc = k ? pcc : std::nan("");
    r.pcc_label = k ? (pcc > 0.95 ? "1.0" : pcc > 0.7 ? "0.9" : "0.5") : "";
    r.seed = seed;
    r.context = 15;
    r.horizon = 12;
    r.segment_length = 1;
    r.smape = smape_value;
    r.mae = smape_value / 3;
    r.rmse = smape_value / 2;
    r.n_series = 767;
    r.best_epoch = 40;
    r.train_seconds = 1.25;
    r.experiment_id = k ? experiment_label(k, r.pcc_label, 12, seed, {}) : experiment_label(0, "", 12, seed, {});
    r.config_hash = "h" + std::to_string(k) + "-" + std::to_string(seed) + "-" + r.pcc_label;
    r.code_version = code_version();
    r.run_dir = "runs/" + r.dataset + "-" + r.experiment_id;
    return r;
}

} // namespace

TEST_SUITE("experiment_cli") {

TEST_CASE("experiment spec validation") {
    auto s = ExperimentSpec::make("hospital", ModelKind::base_lstm, 0, 1);
    CHECK_NOTHROW(s.validate());
    s.gamma = 0.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = ExperimentSpec::make("hospital", ModelKind::base_lstm, 0, 1);
    s.skip_set = {1};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = ExperimentSpec::make("hospital", ModelKind::base_lstm, 4, 1);
    s.target_pcc = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = ExperimentSpec::make("hospital", ModelKind::base_lstm, 2, 1);
    CHECK_THROWS_AS(s.validate(), ConfigError);  // neither gamma nor pcc
    s.target_pcc = 1.0;
    s.gamma = 0.1;
    CHECK_THROWS_AS(s.validate(), ConfigError);  // both
    s.gamma.reset();
    s.skip_set = {3};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.skip_set = {1, 2};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.skip_set = {2};
    CHECK_NOTHROW(s.validate());
    CHECK(s.k_active() == 1);
}

TEST_CASE("config parsing") {
    const auto s = parse_experiment_spec(R"({"dataset": "traffic", "model": "base_lstm", "k": 3, "target_pcc": 1.0,
        "skip": [2], "seed": 42, "train": {"epochs": 7}})");
    CHECK(s.dataset == "traffic");
    CHECK(s.k == 3);
    CHECK(s.skip_set == std::vector<std::size_t>{2});
    CHECK(s.seed == 42);
    CHECK(s.train.seed == 42);
    CHECK(s.train.epochs == 7);
    CHECK(s.train.batches_per_epoch == 200);
    CHECK(parse_experiment_spec(R"({"dataset": "hospital", "model": "seg_lstm"})").train.batches_per_epoch == 500);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"dataset": "hospital", "colour": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"dataset": "hospital", "train": {"lr": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"dataset": "hospital", "k": "two"})"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_spec("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"model": "base_lstm"})"), ConfigError);
}

TEST_CASE("spec json round trip and config hash") {
    auto s = quick_spec(ModelKind::seg_lstm, 2, 9);
    s.gamma = 0.4;
    s.skip_set = {1};
    s.max_series = 10;
    const auto back = parse_experiment_spec(experiment_spec_json(s));
    CHECK(config_hash(back) == config_hash(s));
    CHECK(config_hash(s).size() == 16);
    auto moved = s;
    moved.data_path = "/elsewhere/hospital.tsf";
    CHECK(config_hash(moved) == config_hash(s));
    auto reseeded = s;
    reseeded.seed = 10;
    reseeded.train.seed = 10;
    CHECK(config_hash(reseeded) != config_hash(s));
}

TEST_CASE("dataset shapes") {
    auto s = ExperimentSpec::make("hospital", ModelKind::base_lstm, 0, 1);
    auto r = resolve_shape(s);
    CHECK(r.context == 15);
    CHECK(r.horizon == 12);
    s.model = ModelKind::seg_lstm;
    r = resolve_shape(s);
    CHECK(r.context == 36);
    CHECK(r.segment_length == 12);
    s.dataset = "traffic";
    r = resolve_shape(s);
    CHECK(r.horizon == 8);
    CHECK(r.context == 64);
    CHECK(r.segment_length == 8);
    CHECK(r.context % r.segment_length == 0);
    s.dataset = "electricity";
    s.model = ModelKind::base_lstm;
    CHECK(resolve_shape(s).horizon == 168);
    s.dataset = "mystery";
    CHECK_THROWS_AS(resolve_shape(s), ConfigError);
    s.context = 10;
    s.horizon = 5;
    CHECK(resolve_shape(s).context == 10);
    s.model = ModelKind::seg_lstm;
    s.segment_length = 3;
    CHECK_THROWS_AS(resolve_shape(s), ConfigError);
    CHECK(monash_file_name("hospital") == "hospital_dataset.tsf");
}

TEST_CASE("grid expansion mirrors the covariate table rows") {
    const auto g = parse_grid_spec(R"({"datasets": ["hospital"], "models": ["base_lstm", "seg_lstm"]})");
    const auto cells = g.expand();
    std::set<std::tuple<std::string, std::size_t, double>> groups;
    std::set<std::string> hashes;
    for (const auto& c : cells) {
        groups.insert({std::string(to_string(c.model)), c.k, c.target_pcc.value_or(-1)});
        hashes.insert(config_hash(c));
    }
    CHECK(groups.size() == 2 + 18);
    CHECK(cells.size() == 2 * 5 + 18);
    CHECK(hashes.size() == cells.size());
    for (const auto& c : cells) {
        CHECK(c.train.seed == c.seed);
        if (c.k == 0) CHECK_FALSE(c.target_pcc.has_value());
    }
    CHECK(GridSpec{}.expand().empty());
    CHECK_THROWS_AS(parse_grid_spec(R"({"datasets": ["hospital"], "modles": ["base_lstm"]})"), ConfigError);
    CHECK_THROWS_AS(parse_grid_spec(R"({"datasets": ["hospital"], "models": ["base_lstm"], "k": [5]})"), ConfigError);
}

TEST_CASE("experiment labels") {
    CHECK(experiment_label(2, "1.0", 8, 42, {2}) == "cov-2-pearsn-1.0-pl-8-seed-42-skip-1");
    CHECK(experiment_label(3, "0.9", 12, 1, {}) == "cov-3-pearsn-0.9-pl-12-seed-1");
    CHECK(experiment_label(0, "", 12, 3, {}) == "uni-pl-12-seed-3");
}

TEST_CASE("results csv round trip, sorting and schema errors") {
    std::vector<ResultRow> rows{sample_row("tourism", 0, 0, 1, 20.0), sample_row("hospital", 3, 0.51, 1, 15.0),
                                sample_row("hospital", 0, 0, 2, 17.9), sample_row("hospital", 3, 0.99, 1, 13.5),
                                sample_row("hospital", 0, 0, 1, 17.4)};
    rows[1].skip_set = "2";
    rows[1].mae = 0.1 + 0.2;
    std::stringstream ss;
    write_results_header(ss);
    for (const auto& r : rows) write_result_row(ss, r);
    const auto back = read_results(ss);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i].same_outcome(rows[i]));
    CHECK(std::isnan(back[0].mean_pcc));

    auto sorted = rows;
    sort_results(sorted);
    CHECK(sorted[0].dataset == "hospital");
    CHECK(sorted[0].k == 0);
    CHECK(sorted[0].seed == 1);
    CHECK(sorted[1].seed == 2);
    CHECK(sorted[2].mean_pcc == 0.99);  // pcc descending
    CHECK(sorted[4].dataset == "tourism");

    std::stringstream bad("dataset,model,k\nhospital,base_lstm,0\n");
    CHECK_THROWS_AS(read_results(bad), SchemaError);

    const auto dir = testing::temp_dir("results");
    write_results_file(dir / "r.csv", rows);
    CHECK(read_results_file(dir / "r.csv").size() == rows.size());
    CHECK_FALSE(fs::exists(dir / "r.csv.tmp"));
    write_results_file(dir / "empty.csv", {});
    CHECK(read_csv(dir / "empty.csv").size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("run_experiment: one row, artifacts, and bit-identical reruns") {
    const auto data = small_hospital();
    const auto dir = testing::temp_dir("run");
    const auto spec = quick_spec(ModelKind::base_lstm, 0, 1);
    const auto a = run_experiment(spec, *data, RunOptions{dir, {}});
    REQUIRE_FALSE(a.failed);
    CHECK(a.row.horizon == 12);
    CHECK(a.row.context == 15);
    CHECK(a.row.dataset == "hospital");
    CHECK(a.row.n_series == 24);
    CHECK(a.row.seed == 1);
    CHECK(a.row.config_hash == config_hash(spec));
    CHECK(a.row.code_version == code_version());
    const auto run_dir = dir / a.row.run_dir;
    for (const char* f : {"spec.json", "checkpoint.txt", "fit.csv", "trajectory.csv", "series_metrics.csv", "result.csv"})
        CHECK(fs::exists(run_dir / f));
    CHECK_FALSE(fs::exists(run_dir / "FAILED"));
    CHECK(read_csv(run_dir / "trajectory.csv").size() == 1 + 12);

    const auto b = run_experiment(spec, *data, RunOptions{});
    CHECK(b.row.same_outcome(a.row));
    fs::remove_all(dir);
}

TEST_CASE("covariate runs resolve gamma from the target pcc and label by realized pcc") {
    const auto data = small_hospital();
    auto spec = quick_spec(ModelKind::seg_lstm, 3, 42);
    spec.target_pcc = 1.0;
    spec.skip_set = {2};
    const auto out = run_experiment(spec, *data, RunOptions{});
    REQUIRE_FALSE(out.failed);
    CHECK(out.row.gamma == 0.0);
    CHECK(out.row.pcc_label == "1.0");
    CHECK(out.row.skip_set == "2");
    CHECK(out.row.experiment_id == "cov-2-pearsn-1.0-pl-12-seed-42-skip-1");
    CHECK(out.row.segment_length == 12);
}

TEST_CASE("stage errors mark the run as failed") {
    auto records = testing::surrogate_records("hospital", 1);
    records.resize(3);
    for (auto& r : records) r.values.resize(20);
    const TsfDataset tiny = testing::as_tsf("hospital", records, 12, 12, 15);
    const auto dir = testing::temp_dir("fail");
    const auto out = run_experiment(quick_spec(ModelKind::base_lstm, 0, 1), tiny, RunOptions{dir, {}});
    CHECK(out.failed);
    CHECK_FALSE(out.error.empty());
    bool marker = false;
    for (const auto& e : fs::recursive_directory_iterator(dir)) marker = marker || e.path().filename() == "FAILED";
    CHECK(marker);
    fs::remove_all(dir);

    auto missing = quick_spec(ModelKind::base_lstm, 0, 1);
    missing.data_path = "/nonexistent/hospital_dataset.tsf";
    CHECK(run_experiment(missing, RunOptions{}).failed);
}

TEST_CASE("grid: parallelism does not change results, resume trains nothing") {
    GridSpec g;
    g.datasets = {"hospital"};
    g.models = {ModelKind::base_lstm};
    g.ks = {0, 1};
    g.target_pccs = {1.0};
    g.univariate_seeds = {1, 2};
    g.train.epochs = 2;
    g.train.batches_per_epoch = 2;
    g.train.batch_size = 8;

    GridOptions serial;
    serial.output_dir = testing::temp_dir("grid1");
    serial.datasets = {{"hospital", small_hospital()}};
    GridOptions par = serial;
    par.output_dir = testing::temp_dir("grid4");
    par.parallel = 4;

    const auto a = run_grid(g, serial);
    const auto b = run_grid(g, par);
    CHECK(a.trained == 3);
    CHECK(a.failures.empty());
    const auto ra = read_results_file(serial.output_dir / "results.csv");
    const auto rb = read_results_file(par.output_dir / "results.csv");
    REQUIRE(ra.size() == 3);
    REQUIRE(rb.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ra[i].same_outcome(rb[i]));

    GridOptions again = serial;
    again.resume = true;
    const auto c = run_grid(g, again);
    CHECK(c.trained == 0);
    CHECK(c.skipped == 3);
    const auto rc = read_results_file(serial.output_dir / "results.csv");
    REQUIRE(rc.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(rc[i].same_outcome(ra[i]));

    GridOptions empty_opts;
    empty_opts.output_dir = testing::temp_dir("grid0");
    CHECK(run_grid(GridSpec{}, empty_opts).rows.empty());
    CHECK(slurp(empty_opts.output_dir / "results.csv").find('\n') == slurp(empty_opts.output_dir / "results.csv").size() - 1);
    for (const auto& d : {serial.output_dir, par.output_dir, empty_opts.output_dir}) fs::remove_all(d);
}

TEST_CASE("grid records failing cells and continues") {
    GridSpec g;
    g.datasets = {"hospital", "tourism"};
    g.models = {ModelKind::base_lstm};
    g.ks = {0};
    g.univariate_seeds = {1};
    g.train.epochs = 1;
    g.train.batches_per_epoch = 1;
    g.train.batch_size = 4;
    GridOptions opts;
    opts.output_dir = testing::temp_dir("gridfail");
    opts.data_dir = "/nonexistent";
    opts.datasets = {{"hospital", small_hospital()}};
    const auto out = run_grid(g, opts);
    CHECK(out.rows.size() == 1);
    REQUIRE(out.failures.size() == 1);
    CHECK(out.failures[0].find("tourism") != std::string::npos);
    fs::remove_all(opts.output_dir);
}

TEST_CASE("published reference tables") {
    CHECK(benchmark_reference("hospital", "base_lstm", Metric::smape) == 17.52);
    CHECK(benchmark_reference("hospital", "seg_lstm", Metric::smape) == 18.05);
    CHECK(benchmark_reference("electricity", "seg_lstm", Metric::rmse) == 469.07);
    CHECK_FALSE(benchmark_reference("electricity", "WaveNet", Metric::smape).has_value());
    CHECK(benchmark_models().size() == 7);
    const auto cell = covariate_reference("hospital", "base_lstm", Metric::smape, 3, 1.0);
    REQUIRE(cell.has_value());
    CHECK(cell->value == 13.49);
    CHECK_FALSE(cell->ci95.has_value());
    const auto uni9 = covariate_reference("hospital", "base_lstm", Metric::smape, 0, 0.9);
    const auto uni5 = covariate_reference("hospital", "base_lstm", Metric::smape, 0, 0.5);
    REQUIRE(uni9.has_value());
    REQUIRE(uni5.has_value());
    CHECK(uni9->value == uni5->value);
    CHECK(uni9->ci95.has_value());
}

TEST_CASE("report outputs") {
    const auto dir = testing::temp_dir("report");
    std::vector<ResultRow> rows;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) rows.push_back(sample_row("hospital", 0, 0, seed, 17.0 + 0.1 * seed));
    rows.push_back(sample_row("hospital", 3, 0.99, 1, 13.0));
    rows.push_back(sample_row("hospital", 3, 0.88, 1, 14.0));
    rows.push_back(sample_row("hospital", 3, 0.52, 1, 15.5));
    rows.push_back(sample_row("traffic", 3, 0.99, 1, 9.0));
    // one run with a trajectory on disk
    fs::create_directories(dir / rows[5].run_dir);
    std::ofstream(dir / rows[5].run_dir / "trajectory.csv") << "experiment_id,t,smape_t\n" << rows[5].experiment_id
                                                             << ",1,0.5\n" << rows[5].experiment_id << ",2,1.5\n";
    write_results_file(dir / "results.csv", rows);

    const auto out = dir / "report";
    const auto summary = write_report(dir / "results.csv", out);
    CHECK_FALSE(summary.files.empty());

    const auto bench = read_csv(out / "benchmark.csv");
    const auto& h = bench.front();
    bool found = false;
    for (std::size_t i = 1; i < bench.size(); ++i) {
        const auto& r = bench[i];
        if (r[column(h, "dataset")] == "hospital" && r[column(h, "model")] == "base_lstm" &&
            r[column(h, "metric")] == "smape") {
            found = true;
            CHECK(std::stod(r[column(h, "reference")]) == 17.52);
            const double measured = std::stod(r[column(h, "measured")]);
            CHECK(measured == doctest::Approx(17.3).epsilon(1e-12));
            CHECK(std::stod(r[column(h, "delta")]) == doctest::Approx(measured - 17.52).epsilon(1e-12));
            CHECK(r[column(h, "runs")] == "5");
        }
    }
    CHECK(found);
    CHECK(fs::exists(out / "benchmark.txt"));

    const auto curve = read_csv(out / "pcc_curve_base_lstm_k3.csv");
    std::set<std::pair<std::string, std::string>> keys;
    for (std::size_t i = 1; i < curve.size(); ++i)
        keys.insert({curve[i][column(curve[0], "dataset")], curve[i][column(curve[0], "pcc_label")]});
    CHECK(keys.size() == curve.size() - 1);
    CHECK(keys.size() == 4);

    // k=0 aggregate is repeated identically under every pcc column
    const auto cov = read_csv(out / "covariates.csv");
    const auto& ch = cov.front();
    std::vector<std::string> uni;
    for (std::size_t i = 1; i < cov.size(); ++i) {
        const auto& r = cov[i];
        if (r[column(ch, "dataset")] == "hospital" && r[column(ch, "k")] == "0" && r[column(ch, "metric")] == "smape") {
            auto copy = r;
            copy[column(ch, "pcc")] = "";
            std::string joined;
            for (const auto& c : copy) joined += c + "|";
            uni.push_back(joined);
        }
    }
    REQUIRE(uni.size() == 3);
    CHECK(uni[0] == uni[1]);
    CHECK(uni[1] == uni[2]);

    CHECK(fs::exists(out / "trajectories.csv"));
    CHECK(read_csv(out / "trajectories.csv").size() >= 3);
    CHECK(summary.missing_trajectories.size() == rows.size() - 1);

    std::ofstream(dir / "bad.csv") << "dataset,smape\nhospital,1\n";
    CHECK_THROWS_AS(write_report(dir / "bad.csv", dir / "bad"), SchemaError);
    fs::remove_all(dir);
}

}
