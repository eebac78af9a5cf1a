#include "lstmcov/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "lstmcov/augment.hpp"
#include "lstmcov/errors.hpp"

namespace lstmcov {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string code_version() { return "lstmcov-1.0.0"; }

std::string monash_file_name(std::string_view dataset) {
    const auto name = canonical_dataset_name(dataset);
    if (name == "hospital") return "hospital_dataset.tsf";
    if (name == "tourism") return "tourism_monthly_dataset.tsf";
    if (name == "traffic") return "traffic_weekly_dataset.tsf";
    if (name == "electricity") return "electricity_hourly_dataset.tsf";
    return name + ".tsf";
}

ExperimentSpec ExperimentSpec::make(std::string dataset, ModelKind model, std::size_t k, std::uint64_t seed) {
    ExperimentSpec s;
    s.dataset = std::move(dataset);
    s.model = model;
    s.k = k;
    s.seed = seed;
    s.train = TrainConfig::defaults(model);
    return s;
}

void ExperimentSpec::validate() const {
    if (dataset.empty()) throw ConfigError("experiment needs a dataset");
    if (k > 3) throw ConfigError("k must be in 0..3, got " + std::to_string(k));
    if (k == 0) {
        if (gamma || target_pcc || !skip_set.empty())
            throw ConfigError("univariate (k=0) experiments take no gamma, target_pcc or skip set");
    } else {
        if (gamma.has_value() == target_pcc.has_value())
            throw ConfigError("covariate experiments need exactly one of gamma and target_pcc");
        if (gamma && !(*gamma >= 0.0 && std::isfinite(*gamma))) throw ConfigError("gamma must be finite and >= 0");
        if (target_pcc && !(*target_pcc > 0.0 && *target_pcc <= 1.0))
            throw ConfigError("target_pcc must be in (0, 1]");
        std::set<std::size_t> seen;
        for (auto j : skip_set) {
            if (j < 1 || j > k) throw ConfigError("skipped lead " + std::to_string(j) + " outside 1.." + std::to_string(k));
            if (!seen.insert(j).second) throw ConfigError("skipped lead " + std::to_string(j) + " listed twice");
        }
        if (skip_set.size() >= k) throw ConfigError("skip set removes every covariate");
    }
    if (context && *context < 1) throw ConfigError("context must be >= 1");
    if (horizon && *horizon < 1) throw ConfigError("horizon must be >= 1");
    if (segment_length && *segment_length < 1) throw ConfigError("segment_length must be >= 1");
    if (max_series && *max_series < 1) throw ConfigError("max_series must be >= 1");
    train.validate();
}

TrainConfig TrainOverrides::apply(TrainConfig c) const {
    if (learning_rate) c.learning_rate = *learning_rate;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (batches_per_epoch) c.batches_per_epoch = *batches_per_epoch;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (dropout) c.dropout = *dropout;
    if (early_stopping_patience) c.early_stopping_patience = *early_stopping_patience;
    return c;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <class T>
void maybe(const json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key)) out = get_as<T>(j, key);
}

TrainOverrides parse_train(const json& j) {
    reject_unknown(j,
                   {"learning_rate", "epochs", "batch_size", "batches_per_epoch", "weight_decay", "dropout",
                    "early_stopping_patience"},
                   "train");
    TrainOverrides t;
    maybe(j, "learning_rate", t.learning_rate);
    maybe(j, "epochs", t.epochs);
    maybe(j, "batch_size", t.batch_size);
    maybe(j, "batches_per_epoch", t.batches_per_epoch);
    maybe(j, "weight_decay", t.weight_decay);
    maybe(j, "dropout", t.dropout);
    maybe(j, "early_stopping_patience", t.early_stopping_patience);
    return t;
}

ExperimentSpec spec_from(const json& j) {
    reject_unknown(j,
                   {"dataset", "data_path", "model", "k", "target_pcc", "gamma", "skip", "seed", "context", "horizon",
                    "segment_length", "max_series", "train"},
                   "experiment");
    if (!j.contains("dataset")) throw ConfigError("experiment lacks 'dataset'");
    ExperimentSpec s;
    s.dataset = get_as<std::string>(j, "dataset");
    if (j.contains("data_path")) s.data_path = get_as<std::string>(j, "data_path");
    if (j.contains("model")) s.model = parse_model_kind(get_as<std::string>(j, "model"));
    if (j.contains("k")) s.k = get_as<std::size_t>(j, "k");
    maybe(j, "target_pcc", s.target_pcc);
    maybe(j, "gamma", s.gamma);
    if (j.contains("skip")) s.skip_set = get_as<std::vector<std::size_t>>(j, "skip");
    if (j.contains("seed")) s.seed = get_as<std::uint64_t>(j, "seed");
    maybe(j, "context", s.context);
    maybe(j, "horizon", s.horizon);
    maybe(j, "segment_length", s.segment_length);
    maybe(j, "max_series", s.max_series);
    TrainOverrides t;
    if (j.contains("train")) t = parse_train(j.at("train"));
    s.train = t.apply(TrainConfig::defaults(s.model));
    s.train.seed = s.seed;
    return s;
}

json parse_document(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

json spec_to(const ExperimentSpec& s, bool with_path) {
    json j;
    j["dataset"] = s.dataset;
    if (with_path && !s.data_path.empty()) j["data_path"] = s.data_path;
    j["model"] = std::string(to_string(s.model));
    j["k"] = s.k;
    if (s.target_pcc) j["target_pcc"] = *s.target_pcc;
    if (s.gamma) j["gamma"] = *s.gamma;
    if (!s.skip_set.empty()) j["skip"] = s.skip_set;
    j["seed"] = s.seed;
    if (s.context) j["context"] = *s.context;
    if (s.horizon) j["horizon"] = *s.horizon;
    if (s.segment_length) j["segment_length"] = *s.segment_length;
    if (s.max_series) j["max_series"] = *s.max_series;
    j["train"] = {{"learning_rate", s.train.learning_rate},
                  {"epochs", s.train.epochs},
                  {"batch_size", s.train.batch_size},
                  {"batches_per_epoch", s.train.batches_per_epoch},
                  {"weight_decay", s.train.weight_decay},
                  {"dropout", s.train.dropout},
                  {"early_stopping_patience", s.train.early_stopping_patience}};
    return j;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string join_leads(const std::vector<std::size_t>& leads) {
    std::string out;
    for (std::size_t i = 0; i < leads.size(); ++i) out += (i ? ";" : "") + std::to_string(leads[i]);
    return out;
}

} // namespace

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
    auto s = spec_from(parse_document(json_text));
    s.validate();
    return s;
}

std::string experiment_spec_json(const ExperimentSpec& spec) { return spec_to(spec, true).dump(2) + "\n"; }

std::string config_hash(const ExperimentSpec& spec) { return hex16(fnv1a(spec_to(spec, false).dump())); }

ResolvedShape resolve_shape(const ExperimentSpec& spec) {
    std::optional<DatasetConstants> defaults;
    try {
        defaults = dataset_defaults(canonical_dataset_name(spec.dataset));
    } catch (const ConfigError&) {
    }
    auto need = [&](const char* what) {
        return ConfigError("dataset '" + spec.dataset + "' has no default " + what + "; set it in the config");
    };
    ResolvedShape r{};
    if (spec.horizon) r.horizon = *spec.horizon;
    else if (defaults) r.horizon = defaults->horizon;
    else throw need("horizon");

    if (spec.segment_length) r.segment_length = *spec.segment_length;
    else if (defaults) r.segment_length = defaults->seasonality;
    else r.segment_length = spec.model == ModelKind::seg_lstm ? throw need("segment_length") : 1;

    if (spec.context) r.context = *spec.context;
    else if (!defaults) throw need("context");
    else if (spec.model == ModelKind::seg_lstm) r.context = defaults->seg_context_multiplier * r.horizon;
    else r.context = defaults->base_context_length;

    if (spec.model == ModelKind::seg_lstm && r.context % r.segment_length != 0)
        throw ConfigError("context " + std::to_string(r.context) + " is not a multiple of segment length " +
                          std::to_string(r.segment_length));
    return r;
}

std::vector<ExperimentSpec> GridSpec::expand() const {
    std::vector<ExperimentSpec> out;
    std::set<std::string> seen;
    auto push = [&](ExperimentSpec s) {
        s.validate();
        if (seen.insert(config_hash(s)).second) out.push_back(std::move(s));
    };
    for (const auto& dataset : datasets)
        for (const auto model : models)
            for (const auto k : ks) {
                auto cell = [&](std::uint64_t seed) {
                    ExperimentSpec s = base;
                    s.dataset = dataset;
                    s.model = model;
                    s.k = k;
                    s.seed = seed;
                    s.target_pcc.reset();
                    s.gamma.reset();
                    s.skip_set.clear();
                    s.train = train.apply(TrainConfig::defaults(model));
                    s.train.seed = seed;
                    return s;
                };
                if (k == 0) {
                    for (auto seed : univariate_seeds) push(cell(seed));
                    continue;
                }
                for (auto pcc : target_pccs)
                    for (auto seed : covariate_seeds) {
                        auto s = cell(seed);
                        s.target_pcc = pcc;
                        push(std::move(s));
                    }
            }
    for (const auto& c : cells) push(c);
    return out;
}

GridSpec parse_grid_spec(const std::string& json_text) {
    const json j = parse_document(json_text);
    reject_unknown(j,
                   {"datasets", "models", "k", "target_pcc", "univariate_seeds", "covariate_seeds", "data_path",
                    "context", "horizon", "segment_length", "max_series", "train", "cells"},
                   "grid");
    GridSpec g;
    if (j.contains("datasets")) g.datasets = get_as<std::vector<std::string>>(j, "datasets");
    if (j.contains("models"))
        for (const auto& m : get_as<std::vector<std::string>>(j, "models")) g.models.push_back(parse_model_kind(m));
    if (j.contains("k")) g.ks = get_as<std::vector<std::size_t>>(j, "k");
    if (j.contains("target_pcc")) g.target_pccs = get_as<std::vector<double>>(j, "target_pcc");
    if (j.contains("univariate_seeds")) g.univariate_seeds = get_as<std::vector<std::uint64_t>>(j, "univariate_seeds");
    if (j.contains("covariate_seeds")) g.covariate_seeds = get_as<std::vector<std::uint64_t>>(j, "covariate_seeds");
    if (j.contains("data_path")) g.base.data_path = get_as<std::string>(j, "data_path");
    maybe(j, "context", g.base.context);
    maybe(j, "horizon", g.base.horizon);
    maybe(j, "segment_length", g.base.segment_length);
    maybe(j, "max_series", g.base.max_series);
    if (j.contains("train")) g.train = parse_train(j.at("train"));
    if (j.contains("cells")) {
        if (!j.at("cells").is_array()) throw ConfigError("'cells' must be an array");
        for (const auto& c : j.at("cells")) g.cells.push_back(spec_from(c));
    }
    if (!g.datasets.empty() && g.models.empty()) throw ConfigError("grid lists datasets but no models");
    g.expand();  // validates every cell
    return g;
}

bool ResultRow::same_outcome(const ResultRow& o) const {
    auto bits_equal = [](double a, double b) {
        return (std::isnan(a) && std::isnan(b)) || std::memcmp(&a, &b, sizeof a) == 0;
    };
    return dataset == o.dataset && model == o.model && k == o.k && skip_set == o.skip_set &&
           bits_equal(gamma, o.gamma) && bits_equal(mean_pcc, o.mean_pcc) && pcc_label == o.pcc_label &&
           seed == o.seed && context == o.context && horizon == o.horizon && segment_length == o.segment_length &&
           bits_equal(smape, o.smape) && bits_equal(mae, o.mae) && bits_equal(rmse, o.rmse) &&
           n_series == o.n_series && n_excluded == o.n_excluded && n_too_short == o.n_too_short &&
           best_epoch == o.best_epoch && experiment_id == o.experiment_id && config_hash == o.config_hash &&
           code_version == o.code_version && run_dir == o.run_dir;
}

const std::vector<std::string>& result_columns() {
    static const std::vector<std::string> cols{
        "dataset",   "model",      "k",           "skip_set",   "gamma",         "mean_pcc",      "seed",
        "C",         "H",          "d",           "smape",      "mae",           "rmse",          "n_series",
        "n_excluded", "best_epoch", "train_seconds", "pcc_label", "n_too_short", "experiment_id", "config_hash",
        "code_version", "run_dir"};
    return cols;
}

void write_results_header(std::ostream& out) {
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
}

void write_result_row(std::ostream& out, const ResultRow& r) {
    out << r.dataset << ',' << r.model << ',' << r.k << ',' << r.skip_set << ',' << format_double(r.gamma) << ','
        << format_double(r.mean_pcc) << ',' << r.seed << ',' << r.context << ',' << r.horizon << ','
        << r.segment_length << ',' << format_double(r.smape) << ',' << format_double(r.mae) << ','
        << format_double(r.rmse) << ',' << r.n_series << ',' << r.n_excluded << ',' << r.best_epoch << ','
        << format_double(r.train_seconds) << ',' << r.pcc_label << ',' << r.n_too_short << ',' << r.experiment_id
        << ',' << r.config_hash << ',' << r.code_version << ',' << r.run_dir << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

} // namespace

std::vector<ResultRow> read_results(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("results file is empty");
    const auto header = split_csv(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    std::vector<std::string> missing;
    for (const auto& c : result_columns())
        if (!col.count(c)) missing.push_back(c);
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw SchemaError("results file lacks columns: " + names);
    }
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()),
                             line_no);
        auto get = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
        auto num = [&](const char* name) -> double {
            const auto& s = get(name);
            if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
            double v = 0.0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size())
                throw ParseError(std::string("bad number in column ") + name, line_no);
            return v;
        };
        auto count = [&](const char* name) -> std::uint64_t {
            const auto& s = get(name);
            std::uint64_t v = 0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size())
                throw ParseError(std::string("bad integer in column ") + name, line_no);
            return v;
        };
        ResultRow r;
        r.dataset = get("dataset");
        r.model = get("model");
        r.k = count("k");
        r.skip_set = get("skip_set");
        r.gamma = num("gamma");
        r.mean_pcc = num("mean_pcc");
        r.pcc_label = get("pcc_label");
        r.seed = count("seed");
        r.context = count("C");
        r.horizon = count("H");
        r.segment_length = count("d");
        r.smape = num("smape");
        r.mae = num("mae");
        r.rmse = num("rmse");
        r.n_series = count("n_series");
        r.n_excluded = count("n_excluded");
        r.n_too_short = count("n_too_short");
        r.best_epoch = count("best_epoch");
        r.train_seconds = num("train_seconds");
        r.experiment_id = get("experiment_id");
        r.config_hash = get("config_hash");
        r.code_version = get("code_version");
        r.run_dir = get("run_dir");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> read_results_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open results file " + path.string());
    return read_results(in);
}

void sort_results(std::vector<ResultRow>& rows) {
    auto pcc_key = [](const ResultRow& r) { return std::isnan(r.mean_pcc) ? -1.0 : r.mean_pcc; };
    std::sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.model != b.model) return a.model < b.model;
        if (a.k != b.k) return a.k < b.k;
        if (pcc_key(a) != pcc_key(b)) return pcc_key(a) > pcc_key(b);
        if (a.skip_set != b.skip_set) return a.skip_set < b.skip_set;
        if (a.seed != b.seed) return a.seed < b.seed;
        return a.config_hash < b.config_hash;
    });
}

void write_results_file(const fs::path& path, std::vector<ResultRow> rows) {
    sort_results(rows);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        write_results_header(out);
        for (const auto& r : rows) write_result_row(out, r);
    }
    fs::rename(tmp, path);
}

std::string experiment_label(std::size_t k_active, const std::string& pcc_label, std::size_t horizon,
                             std::uint64_t seed, const std::vector<std::size_t>& skip_set) {
    std::string label = k_active == 0 ? "uni" : "cov-" + std::to_string(k_active) + "-pearsn-" + pcc_label;
    label += "-pl-" + std::to_string(horizon) + "-seed-" + std::to_string(seed);
    if (!skip_set.empty()) {
        label += "-skip";
        for (auto j : skip_set) label += "-" + std::to_string(j - 1);
    }
    return label;
}

namespace {

DatasetPolicy run_policy() { return DatasetPolicy{1, MissingValueAction::reject_file}; }

fs::path resolve_data_path(const ExperimentSpec& spec, const RunOptions& options) {
    if (!spec.data_path.empty()) return spec.data_path;
    fs::path dir = options.data_dir;
    if (dir.empty()) {
        const char* env = std::getenv(data_dir_env);
        if (!env || !*env)
            throw ConfigError(std::string("no data_path given and ") + data_dir_env + " is not set");
        dir = env;
    }
    return dir / monash_file_name(spec.dataset);
}

std::string pcc_label_of(double mean_pcc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", mean_pcc);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace

std::shared_ptr<const TsfDataset> load_experiment_dataset(const ExperimentSpec& spec, const RunOptions& options) {
    const auto path = resolve_data_path(spec, options);
    std::optional<DatasetConstants> constants;
    try {
        dataset_defaults(canonical_dataset_name(spec.dataset));
    } catch (const ConfigError&) {
        const auto shape = resolve_shape(spec);
        constants = DatasetConstants{shape.horizon, shape.segment_length,
                                     std::max<std::size_t>(1, shape.context / shape.horizon), shape.context};
    }
    return std::make_shared<const TsfDataset>(load_tsf(path, run_policy(), constants));
}

RunOutcome run_experiment(const ExperimentSpec& spec, const TsfDataset& data, const RunOptions& options) {
    RunOutcome outcome;
    ResultRow& row = outcome.row;
    const std::string hash = config_hash(spec);
    fs::path run_dir;
    try {
        spec.validate();
        const auto shape = resolve_shape(spec);
        std::vector<TimeSeriesRecord> records = data.records;
        if (spec.max_series && records.size() > *spec.max_series) records.resize(*spec.max_series);
        if (records.empty()) throw DatasetError("dataset '" + spec.dataset + "' has no series");

        double gamma = 0.0;
        if (spec.k > 0) gamma = spec.gamma ? *spec.gamma
                                           : gamma_for_target_pcc(records, spec.k, *spec.target_pcc, spec.seed,
                                                                  spec.skip_set).gamma;
        ForecastDataset ds{canonical_dataset_name(spec.dataset),
                           augment_dataset(records, AugmentationSpec{spec.k, gamma, spec.skip_set, spec.seed})};
        const double mean_pcc = spec.k > 0 ? mean_realized_pcc(ds.series) : std::numeric_limits<double>::quiet_NaN();

        row.dataset = ds.name;
        row.model = std::string(to_string(spec.model));
        row.k = spec.k;
        row.skip_set = join_leads(spec.skip_set);
        row.gamma = gamma;
        row.mean_pcc = mean_pcc;
        row.pcc_label = spec.k > 0 ? pcc_label_of(mean_pcc) : "";
        row.seed = spec.seed;
        row.context = shape.context;
        row.horizon = shape.horizon;
        row.segment_length = spec.model == ModelKind::seg_lstm ? shape.segment_length : 1;
        row.experiment_id =
            experiment_label(spec.k_active(), row.pcc_label, shape.horizon, spec.seed, spec.skip_set);
        row.config_hash = hash;
        row.code_version = code_version();
        const std::string dir_name = row.dataset + "-" + row.model + "-" + row.experiment_id + "-" + hash.substr(0, 8);
        row.run_dir = "runs/" + dir_name;
        if (!options.output_dir.empty()) {
            run_dir = options.output_dir / "runs" / dir_name;
            fs::create_directories(run_dir);
            fs::remove(run_dir / "FAILED");
            write_text(run_dir / "spec.json", experiment_spec_json(spec));
        }

        ModelConfig mc = spec.model == ModelKind::seg_lstm ? ModelConfig::seg(spec.k_active(), shape.segment_length)
                                                           : ModelConfig::base(spec.k_active());
        mc.dropout = spec.train.dropout;
        Rng init = Rng(spec.seed).fork("init");
        Forecaster model(mc, init);
        TrainConfig tc = spec.train;
        tc.seed = spec.seed;
        auto fitted = fit(model, ds, shape.context, shape.horizon, tc);
        outcome.fit = fitted.report;
        row.best_epoch = fitted.report.best_epoch;
        row.train_seconds = fitted.report.seconds;

        outcome.metrics = evaluate(model, ds, shape.context, shape.horizon, Split::test);
        row.smape = outcome.metrics.smape;
        row.mae = outcome.metrics.mae;
        row.rmse = outcome.metrics.rmse;
        row.n_series = outcome.metrics.evaluated();
        row.n_excluded = outcome.metrics.excluded.size();
        row.n_too_short = outcome.metrics.too_short.size();

        if (!run_dir.empty()) {
            {
                std::ofstream out(run_dir / "checkpoint.txt");
                model.save(out);
            }
            {
                std::ofstream out(run_dir / "fit.csv");
                outcome.fit.write_csv(out);
            }
            {
                std::ofstream out(run_dir / "trajectory.csv");
                out << "experiment_id,t,smape_t\n";
                for (std::size_t t = 0; t < outcome.metrics.trajectory.size(); ++t)
                    out << row.experiment_id << ',' << t + 1 << ',' << format_double(outcome.metrics.trajectory[t])
                        << '\n';
            }
            {
                std::ofstream out(run_dir / "series_metrics.csv");
                out << "series_id,mae,rmse,smape\n";
                for (const auto& s : outcome.metrics.series)
                    out << s.series_id << ',' << format_double(s.mae) << ',' << format_double(s.rmse) << ','
                        << format_double(s.smape) << '\n';
            }
            std::ofstream out(run_dir / "result.csv");
            write_results_header(out);
            write_result_row(out, row);
        }
        if (fitted.report.failed) throw NumericError("training failed: " + fitted.report.failure);
        if (outcome.metrics.excluded_too_many())
            throw NumericError(std::to_string(outcome.metrics.excluded.size()) +
                               " series had non-finite forecasts (more than 1%)");
    } catch (const std::exception& e) {
        outcome.failed = true;
        outcome.error = e.what();
    }
    if (outcome.failed && !options.output_dir.empty()) {
        if (run_dir.empty()) run_dir = options.output_dir / "runs" / ("failed-" + hash);
        std::error_code ec;
        fs::create_directories(run_dir, ec);
        std::ofstream(run_dir / "FAILED") << outcome.error << '\n';
    }
    return outcome;
}

RunOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    std::shared_ptr<const TsfDataset> data;
    try {
        spec.validate();
        data = load_experiment_dataset(spec, options);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        RunOutcome outcome;
        outcome.failed = true;
        outcome.error = e.what();
        if (!options.output_dir.empty()) {
            const auto dir = options.output_dir / "runs" / ("failed-" + config_hash(spec));
            fs::create_directories(dir);
            std::ofstream(dir / "FAILED") << outcome.error << '\n';
        }
        return outcome;
    }
    return run_experiment(spec, *data, options);
}

GridOutcome run_grid(const GridSpec& grid, const GridOptions& options) {
    if (options.output_dir.empty()) throw ConfigError("grid needs an output directory");
    const auto cells = grid.expand();
    for (const auto& c : cells) resolve_shape(c);
    fs::create_directories(options.output_dir);
    const fs::path results_path = options.output_dir / "results.csv";

    GridOutcome outcome;
    std::vector<ResultRow> done;
    if (options.resume && fs::exists(results_path)) done = read_results_file(results_path);
    std::set<std::string> done_hashes;
    for (const auto& r : done) done_hashes.insert(r.config_hash);

    std::vector<const ExperimentSpec*> todo;
    for (const auto& c : cells) {
        if (done_hashes.count(config_hash(c))) ++outcome.skipped;
        else todo.push_back(&c);
    }

    // Datasets are loaded once, up front, and shared read-only by the workers.
    RunOptions run_opts{options.output_dir, options.data_dir};
    std::map<std::string, std::shared_ptr<const TsfDataset>> datasets = options.datasets;
    std::map<std::string, std::string> load_errors;
    auto data_key = [](const ExperimentSpec& s) { return s.dataset + "|" + s.data_path; };
    for (const auto* c : todo) {
        const auto key = data_key(*c);
        if (datasets.count(key) || load_errors.count(key)) continue;
        if (auto it = options.datasets.find(c->dataset); it != options.datasets.end()) {
            datasets[key] = it->second;
            continue;
        }
        try {
            datasets[key] = load_experiment_dataset(*c, run_opts);
        } catch (const std::exception& e) {
            load_errors[key] = e.what();
        }
    }

    write_results_file(results_path, done);
    std::mutex mu;
    std::vector<ResultRow> fresh;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            const auto& spec = *todo[i];
            RunOutcome r;
            const auto key = data_key(spec);
            if (auto err = load_errors.find(key); err != load_errors.end()) {
                r.failed = true;
                r.error = err->second;
            } else {
                r = run_experiment(spec, *datasets.at(key), run_opts);
            }
            std::lock_guard lock(mu);
            if (r.failed) {
                outcome.failures.push_back(config_hash(spec) + " (" + spec.dataset + " " +
                                           std::string(to_string(spec.model)) + " k=" + std::to_string(spec.k) +
                                           " seed=" + std::to_string(spec.seed) + "): " + r.error);
            } else {
                std::ofstream out(results_path, std::ios::app);
                write_result_row(out, r.row);
                fresh.push_back(r.row);
            }
            ++outcome.trained;
            if (options.log)
                *options.log << "[" << outcome.trained << "/" << todo.size() << "] "
                             << (r.failed ? "FAILED " : "") << spec.dataset << " " << to_string(spec.model)
                             << " k=" << spec.k << " seed=" << spec.seed
                             << (r.failed ? "" : " smape=" + format_double(r.row.smape)) << std::endl;
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(options.parallel, todo.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    outcome.rows = done;
    outcome.rows.insert(outcome.rows.end(), fresh.begin(), fresh.end());
    sort_results(outcome.rows);
    std::sort(outcome.failures.begin(), outcome.failures.end());
    write_results_file(results_path, outcome.rows);
    return outcome;
}

} // namespace lstmcov
