#include "lstmcov/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "lstmcov/errors.hpp"

namespace lstmcov {

namespace fs = std::filesystem;

std::string_view to_string(Metric m) {
    switch (m) {
    case Metric::smape: return "smape";
    case Metric::mae: return "mae";
    case Metric::rmse: return "rmse";
    }
    return "?";
}

const std::vector<std::string>& benchmark_models() {
    static const std::vector<std::string> models{"FFNN",        "DeepAR",    "N-BEATS", "WaveNet",
                                                 "Transformer", "base_lstm", "seg_lstm"};
    return models;
}

namespace {

constexpr double na = std::numeric_limits<double>::quiet_NaN();
const std::array<std::string_view, 4> datasets{"hospital", "tourism", "traffic", "electricity"};

// [dataset][metric][model], model order as benchmark_models().
constexpr double benchmark[4][3][7] = {
    {{18.33, 17.45, 17.77, 17.55, 20.08, 17.52, 18.05},
     {22.86, 18.25, 20.18, 19.35, 36.19, 18.03, 19.95},
     {27.77, 22.01, 24.18, 23.38, 40.48, 22.03, 24.19}},
    {{20.11, 18.35, 20.42, 18.92, 19.75, 21.50, 19.85},
     {2022.21, 1871.69, 2003.02, 2095.13, 2146.98, 2336.42, 1956.07},
     {2584.10, 2359.87, 2596.21, 2694.22, 2660.06, 2964.96, 2413.64}},
    {{12.73, 13.22, 12.40, 13.30, 15.28, 12.77, 12.97},
     {1.15, 1.18, 1.11, 1.20, 1.42, 1.15, 1.17},
     {1.55, 1.51, 1.44, 1.61, 1.94, 1.56, 1.58}},
    {{23.06, 20.96, 23.39, na, 24.18, 34.12, 21.20},
     {354.39, 329.75, 350.37, 286.56, 398.80, 525.50, 287.95},
     {519.06, 477.99, 510.91, 489.91, 514.68, 675.03, 469.07}},
};

struct CovariateBlock {
    double k0;
    double k0_ci;
    double cells[3][3];  // [k-1][pcc 1.0, 0.9, 0.5]
};

// [model 0 base, 1 seg][metric][dataset]
constexpr CovariateBlock covariate[2][3][4] = {
    {
        {{17.52, 0.041, {{16.13, 17.45, 17.77}, {14.94, 17.65, 18.06}, {13.49, 17.71, 17.72}}},
         {21.50, 0.531, {{20.54, 22.17, 28.18}, {20.26, 24.33, 27.64}, {23.08, 27.59, 28.13}}},
         {12.77, 0.065, {{11.36, 12.59, 12.89}, {10.73, 12.15, 12.62}, {9.57, 11.86, 13.51}}},
         {34.12, 2.38, {{33.10, 30.41, 33.95}, {33.62, 30.42, 38.16}, {36.18, 33.83, 31.50}}}},
        {{18.03, 0.306, {{16.71, 19.03, 20.18}, {15.62, 20.31, 20.77}, {14.49, 20.18, 20.23}}},
         {2336.42, 147.6, {{2131.98, 2545.43, 3437.56}, {2352.32, 3734.32, 4014.21}, {3593.42, 3340.92, 3574.85}}},
         {1.15, 0.010, {{1.03, 1.14, 1.16}, {0.95, 1.09, 1.14}, {0.84, 1.06, 1.23}}},
         {525.50, 51.74, {{505.01, 526.33, 596.59}, {528.35, 452.38, 519.68}, {631.98, 510.47, 525.58}}}},
        {{22.03, 0.339, {{20.95, 23.22, 24.53}, {20.18, 24.62, 25.15}, {19.65, 24.51, 24.55}}},
         {2964.96, 155.8, {{2764.97, 3178.28, 4409.48}, {3116.47, 4706.51, 5015.75}, {4575.04, 4361.75, 4730.95}}},
         {1.56, 0.010, {{1.47, 1.55, 1.58}, {1.40, 1.49, 1.52}, {1.28, 1.46, 1.68}}},
         {675.03, 5.865, {{650.48, 689.42, 734.66}, {680.63, 606.75, 666.07}, {783.84, 675.23, 668.15}}}},
    },
    {
        {{18.05, 0.135, {{16.07, 17.96, 18.09}, {17.33, 18.49, 18.51}, {17.71, 17.68, 18.77}}},
         {19.85, 0.62, {{19.14, 20.32, 21.56}, {19.07, 20.49, 21.84}, {18.61, 19.96, 23.06}}},
         {12.97, 0.108, {{11.64, 12.85, 13.00}, {11.10, 13.12, 12.86}, {9.88, 11.94, 12.90}}},
         {21.20, 0.232, {{21.01, 22.37, 21.45}, {21.14, 22.48, 22.11}, {21.61, 23.04, 22.20}}}},
        {{19.95, 0.309, {{16.73, 20.83, 21.55}, {20.05, 23.14, 23.46}, {21.34, 22.22, 24.93}}},
         {1956.07, 163.4, {{2078.31, 3180.39, 2292.99}, {1782.48, 3176.35, 2857.37}, {2053.37, 2136.06, 2790.61}}},
         {1.17, 0.021, {{1.04, 1.16, 1.17}, {0.98, 1.19, 1.15}, {0.87, 1.07, 1.16}}},
         {287.95, 50.88, {{286.77, 305.21, 290.34}, {288.11, 306.79, 297.81}, {298.37, 319.63, 312.56}}}},
        // tourism and traffic k=0 repeat the base-lstm values as published; the
        // benchmark table gives 2413.64 and 1.58 for seg-lstm.
        {{24.19, 0.434, {{20.99, 25.47, 26.41}, {24.55, 27.93, 28.27}, {26.12, 26.92, 30.01}}},
         {2964.96, 155.8, {{2612.12, 3803.94, 2833.16}, {2228.58, 3875.71, 3497.33}, {2647.94, 2660.67, 3467.14}}},
         {1.56, 0.010, {{1.48, 1.57, 1.57}, {1.44, 1.61, 1.55}, {1.32, 1.45, 1.53}}},
         {469.07, 7.734, {{481.60, 482.13, 472.95}, {474.75, 488.84, 473.14}, {481.93, 500.84, 492.91}}}},
    },
};

std::optional<std::size_t> dataset_index(std::string_view name) {
    const auto canon = canonical_dataset_name(name);
    for (std::size_t i = 0; i < datasets.size(); ++i)
        if (datasets[i] == canon) return i;
    return std::nullopt;
}

std::optional<std::size_t> model_index(std::string_view model) {
    std::string m(model);
    if (m == "base-lstm") m = "base_lstm";
    if (m == "seg-lstm") m = "seg_lstm";
    const auto& models = benchmark_models();
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i] == m) return i;
    return std::nullopt;
}

std::optional<std::size_t> pcc_index(double pcc) {
    constexpr double levels[3] = {1.0, 0.9, 0.5};
    for (std::size_t i = 0; i < 3; ++i)
        if (std::abs(pcc - levels[i]) < 1e-9) return i;
    return std::nullopt;
}

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double metric_of(const ResultRow& r, Metric m) {
    switch (m) {
    case Metric::smape: return r.smape;
    case Metric::mae: return r.mae;
    case Metric::rmse: return r.rmse;
    }
    return na;
}

constexpr Metric all_metrics[3] = {Metric::smape, Metric::mae, Metric::rmse};

struct Aggregate {
    std::vector<const ResultRow*> rows;

    Interval interval(Metric m) const {
        std::vector<double> v;
        for (const auto* r : rows) v.push_back(metric_of(*r, m));
        return confidence_interval_95(v);
    }
    double mean_pcc() const {
        double s = 0.0;
        for (const auto* r : rows) s += r->mean_pcc;
        return s / static_cast<double>(rows.size());
    }
    double mean_gamma() const {
        double s = 0.0;
        for (const auto* r : rows) s += r->gamma;
        return s / static_cast<double>(rows.size());
    }
};

std::ofstream open_out(const fs::path& path, ReportSummary& summary) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    summary.files.push_back(path);
    return out;
}

double parse_label(const std::string& label) {
    double v = na;
    std::from_chars(label.data(), label.data() + label.size(), v);
    return v;
}

} // namespace

std::optional<double> benchmark_reference(std::string_view dataset, std::string_view model, Metric metric) {
    const auto d = dataset_index(dataset);
    const auto m = model_index(model);
    if (!d || !m) return std::nullopt;
    const double v = benchmark[*d][static_cast<int>(metric)][*m];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

std::optional<CovariateReference> covariate_reference(std::string_view dataset, std::string_view model, Metric metric,
                                                      std::size_t k, double pcc) {
    const auto d = dataset_index(dataset);
    const auto m = model_index(model);
    const auto p = pcc_index(pcc);
    if (!d || !m || *m < 5 || k > 3) return std::nullopt;
    const auto& block = covariate[*m - 5][static_cast<int>(metric)][*d];
    if (k == 0) return CovariateReference{block.k0, block.k0_ci};
    if (!p) return std::nullopt;
    return CovariateReference{block.cells[k - 1][*p], std::nullopt};
}

ReportSummary write_report(const fs::path& results_csv, const fs::path& out_dir) {
    const auto rows = read_results_file(results_csv);
    fs::create_directories(out_dir);
    ReportSummary summary;

    std::map<std::pair<std::string, std::string>, Aggregate> univariate;
    std::map<std::tuple<std::string, std::string, std::size_t, std::string, std::string>, Aggregate> covariates;
    for (const auto& r : rows) {
        if (r.k == 0) univariate[{r.dataset, r.model}].rows.push_back(&r);
        else covariates[{r.dataset, r.model, r.k, r.skip_set, r.pcc_label}].rows.push_back(&r);
    }

    // (a) benchmark comparison for the univariate runs.
    {
        auto out = open_out(out_dir / "benchmark.csv", summary);
        out << "dataset,model,metric,reference,measured,ci95,delta,runs\n";
        for (const auto& [key, agg] : univariate)
            for (auto m : all_metrics) {
                const auto ref = benchmark_reference(key.first, key.second, m);
                const auto iv = agg.interval(m);
                out << key.first << ',' << key.second << ',' << to_string(m) << ',' << (ref ? num(*ref) : "") << ','
                    << num(iv.mean) << ',' << num(iv.half_width) << ',' << (ref ? num(iv.mean - *ref) : "") << ','
                    << agg.rows.size() << '\n';
            }
    }
    {
        auto out = open_out(out_dir / "benchmark.txt", summary);
        out << std::fixed << std::setprecision(2);
        for (const auto& ds : datasets) {
            bool any = false;
            for (const auto& [key, _] : univariate) any = any || canonical_dataset_name(key.first) == ds;
            if (!any) continue;
            out << ds << '\n' << std::left << std::setw(7) << "metric";
            for (const auto& m : benchmark_models()) out << std::right << std::setw(12) << m;
            out << std::setw(12) << "base_meas" << std::setw(10) << "delta" << std::setw(12) << "seg_meas"
                << std::setw(10) << "delta" << '\n';
            for (auto m : all_metrics) {
                out << std::left << std::setw(7) << to_string(m) << std::right;
                for (const auto& model : benchmark_models()) {
                    const auto ref = benchmark_reference(ds, model, m);
                    if (ref) out << std::setw(12) << *ref;
                    else out << std::setw(12) << "-";
                }
                for (const char* model : {"base_lstm", "seg_lstm"}) {
                    const auto it = univariate.find({std::string(ds), model});
                    if (it == univariate.end()) {
                        out << std::setw(12) << "-" << std::setw(10) << "-";
                        continue;
                    }
                    const double v = it->second.interval(m).mean;
                    out << std::setw(12) << v << std::setw(10) << v - *benchmark_reference(ds, model, m);
                }
                out << '\n';
            }
            out << '\n';
        }
    }

    // Covariate cells against the published covariate tables. The univariate
    // aggregate is written once per pcc column, identically.
    {
        auto out = open_out(out_dir / "covariates.csv", summary);
        out << "dataset,model,k,skip_set,pcc,metric,reference,reference_ci95,measured,measured_ci95,delta,runs\n";
        for (const auto& [key, agg] : univariate)
            for (const char* pcc : {"1.0", "0.9", "0.5"})
                for (auto m : all_metrics) {
                    const auto ref = covariate_reference(key.first, key.second, m, 0, 1.0);
                    const auto iv = agg.interval(m);
                    out << key.first << ',' << key.second << ",0,," << pcc << ',' << to_string(m) << ','
                        << (ref ? num(ref->value) : "") << ',' << (ref ? num(*ref->ci95) : "") << ',' << num(iv.mean)
                        << ',' << num(iv.half_width) << ',' << (ref ? num(iv.mean - ref->value) : "") << ','
                        << agg.rows.size() << '\n';
                }
        for (const auto& [key, agg] : covariates) {
            const auto& [dataset, model, k, skip, label] = key;
            for (auto m : all_metrics) {
                std::optional<CovariateReference> ref;
                if (skip.empty()) ref = covariate_reference(dataset, model, m, k, parse_label(label));
                const auto iv = agg.interval(m);
                out << dataset << ',' << model << ',' << k << ',' << skip << ',' << label << ',' << to_string(m) << ','
                    << (ref ? num(ref->value) : "") << ",," << num(iv.mean) << ',' << num(iv.half_width) << ','
                    << (ref ? num(iv.mean - ref->value) : "") << ',' << agg.rows.size() << '\n';
            }
        }
    }

    // (b) sMAPE against realized PCC, one file per (model, k).
    {
        std::map<std::pair<std::string, std::size_t>, std::vector<std::pair<std::string, const Aggregate*>>> curves;
        for (const auto& [key, agg] : covariates) {
            const auto& [dataset, model, k, skip, label] = key;
            if (skip.empty()) curves[{model, k}].push_back({dataset, &agg});
        }
        for (const auto& [key, entries] : curves) {
            auto out = open_out(out_dir / ("pcc_curve_" + key.first + "_k" + std::to_string(key.second) + ".csv"),
                                summary);
            out << "dataset,pcc_label,mean_pcc,gamma,smape,mae,rmse,runs\n";
            for (const auto& [dataset, agg] : entries)
                out << dataset << ',' << agg->rows.front()->pcc_label << ',' << num(agg->mean_pcc()) << ','
                    << num(agg->mean_gamma()) << ',' << num(agg->interval(Metric::smape).mean) << ','
                    << num(agg->interval(Metric::mae).mean) << ',' << num(agg->interval(Metric::rmse).mean) << ','
                    << agg->rows.size() << '\n';
        }
    }

    // (c) horizon trajectories.
    {
        const fs::path base = results_csv.has_parent_path() ? results_csv.parent_path() : fs::path(".");
        auto all = open_out(out_dir / "trajectories.csv", summary);
        all << "dataset,model,k,skip_set,pcc_label,seed,experiment_id,t,smape_t\n";
        for (const auto& r : rows) {
            std::ifstream in(base / r.run_dir / "trajectory.csv");
            if (!in) {
                summary.missing_trajectories.push_back(r.run_dir);
                continue;
            }
            auto out = open_out(out_dir / ("trajectory_" + fs::path(r.run_dir).filename().string() + ".csv"), summary);
            std::string line;
            std::getline(in, line);
            out << line << '\n';
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                out << line << '\n';
                const auto c1 = line.find(',');
                all << r.dataset << ',' << r.model << ',' << r.k << ',' << r.skip_set << ',' << r.pcc_label << ','
                    << r.seed << ',' << line.substr(0, c1) << ',' << line.substr(c1 + 1) << '\n';
            }
        }
    }
    return summary;
}

} // namespace lstmcov
