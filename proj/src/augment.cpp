#include "lstmcov/augment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lstmcov/errors.hpp"
#include "lstmcov/parameters.hpp"

namespace lstmcov {

std::pair<double, bool> AugmentedSeries::channel_value(std::size_t channel, std::size_t t) const {
    if (channel == 0) return {y.at(t), true};
    const auto& col = columns.at(channel - 1);
    if (t < col.values.size()) return {col.values[t], true};
    return {0.0, false};
}

AugmentedSeries AugmentedSeries::univariate(std::string id, std::vector<double> y) {
    AugmentedSeries s;
    s.series_id = std::move(id);
    std::tie(s.mu, s.sigma) = mean_and_std(y);
    s.y = std::move(y);
    return s;
}

std::pair<double, double> mean_and_std(std::span<const double> y) {
    if (y.empty()) throw ArgumentError("mean_and_std of an empty series");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(y.size()))};
}

double pearson_cc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("pearson_cc: lengths differ");
    if (a.size() < 2) throw ArgumentError("pearson_cc: need at least two pairs");
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw ArgumentError("pearson_cc: correlation undefined for a constant input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

AugmentedSeries synthesize_covariates(std::string series_id, std::span<const double> y, std::size_t k, double gamma,
                                      Rng& rng, const std::vector<std::size_t>& skip_set) {
    if (k < 1) throw ArgumentError("synthesize_covariates: k must be >= 1");
    if (k >= y.size())
        throw ArgumentError("synthesize_covariates: k = " + std::to_string(k) + " needs a series longer than k, got " +
                            std::to_string(y.size()));
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("synthesize_covariates: gamma must be >= 0");
    for (auto lead : skip_set)
        if (lead < 1 || lead > k) throw ArgumentError("skip lead " + std::to_string(lead) + " outside 1..k");
    auto skipped = [&](std::size_t lead) { return std::find(skip_set.begin(), skip_set.end(), lead) != skip_set.end(); };
    std::size_t active = 0;
    for (std::size_t j = 1; j <= k; ++j) active += skipped(j) ? 0 : 1;
    if (active == 0) throw ArgumentError("skip set removes every covariate");

    AugmentedSeries s;
    s.series_id = std::move(series_id);
    s.y.assign(y.begin(), y.end());
    s.k = k;
    s.gamma = gamma;
    s.skip_set = skip_set;
    std::sort(s.skip_set.begin(), s.skip_set.end());
    s.skip_set.erase(std::unique(s.skip_set.begin(), s.skip_set.end()), s.skip_set.end());
    std::tie(s.mu, s.sigma) = mean_and_std(y);

    const std::size_t T = y.size();
    for (std::size_t j = 1; j <= k; ++j) {
        CovariateColumn col;
        col.lead = j;
        col.values.resize(T - j);
        for (std::size_t t = 0; t + j < T; ++t) {
            const double eps = rng.normal();
            col.values[t] = y[t + j] + gamma * s.mu * eps + gamma * s.sigma * eps;
        }
        if (skipped(j)) continue;
        try {
            col.realized_pcc = pearson_cc(col.values, y.subspan(j));
        } catch (const ArgumentError&) {
            col.realized_pcc = std::numeric_limits<double>::quiet_NaN();
        }
        s.columns.push_back(std::move(col));
    }
    return s;
}

std::vector<double> gamma_grid() {
    std::vector<double> g;
    for (int i = 0; i < 20; ++i) g.push_back(i / 10.0);
    return g;
}

double mean_realized_pcc(const std::vector<AugmentedSeries>& set) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& s : set)
        for (const auto& c : s.columns)
            if (std::isfinite(c.realized_pcc)) {
                total += c.realized_pcc;
                ++n;
            }
    return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<AugmentedSeries> augment_dataset(const std::vector<TimeSeriesRecord>& records,
                                             const AugmentationSpec& spec) {
    std::vector<AugmentedSeries> out;
    out.reserve(records.size());
    if (spec.k == 0) {
        if (!spec.skip_set.empty()) throw ArgumentError("skip set given without covariates");
        for (const auto& r : records) out.push_back(AugmentedSeries::univariate(r.series_id, r.values));
        return out;
    }
    Rng rng(spec.seed);
    for (const auto& r : records)
        out.push_back(synthesize_covariates(r.series_id, r.values, spec.k, spec.gamma, rng, spec.skip_set));
    return out;
}

std::vector<GammaSweepPoint> gamma_sweep(const std::vector<TimeSeriesRecord>& records, std::size_t k,
                                         std::uint64_t seed, const std::vector<std::size_t>& skip_set) {
    if (records.empty()) throw ArgumentError("gamma sweep over an empty series set");
    std::vector<GammaSweepPoint> sweep;
    for (double g : gamma_grid())
        sweep.push_back({g, mean_realized_pcc(augment_dataset(records, {k, g, skip_set, seed}))});
    return sweep;
}

GammaSweepPoint gamma_for_target_pcc(const std::vector<TimeSeriesRecord>& records, std::size_t k, double target_pcc,
                                     std::uint64_t seed, const std::vector<std::size_t>& skip_set) {
    if (!(target_pcc > 0.0 && target_pcc <= 1.0)) throw ArgumentError("target PCC must be in (0, 1]");
    const auto sweep = gamma_sweep(records, k, seed, skip_set);
    GammaSweepPoint best = sweep.front();
    double best_diff = std::abs(best.mean_pcc - target_pcc);
    for (const auto& p : sweep) {
        const double d = std::abs(p.mean_pcc - target_pcc);
        if (d < best_diff) {
            best = p;
            best_diff = d;
        }
    }
    return best;
}

namespace {
std::string join_leads(const std::vector<std::size_t>& leads) {
    if (leads.empty()) return "-";
    std::string s;
    for (std::size_t i = 0; i < leads.size(); ++i) s += (i ? ";" : "") + std::to_string(leads[i]);
    return s;
}

std::vector<std::size_t> split_leads(const std::string& s) {
    std::vector<std::size_t> out;
    if (s == "-") return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) out.push_back(std::stoul(tok));
    return out;
}
} // namespace

void write_augmented(std::ostream& out, const std::vector<AugmentedSeries>& set, std::uint64_t seed) {
    out << "# lstmcov augmented dataset v1\n";
    for (const auto& s : set) {
        std::vector<std::size_t> active;
        for (const auto& c : s.columns) active.push_back(c.lead);
        out << "@series " << s.series_id << ' ' << format_hex(s.gamma) << ' ' << seed << ' ' << s.k << ' '
            << join_leads(s.skip_set) << ' ' << join_leads(active) << '\n';
        for (std::size_t t = 0; t < s.y.size(); ++t) {
            out << (t + 1) << ' ' << format_hex(s.y[t]);
            for (const auto& c : s.columns) out << ' ' << (t < c.values.size() ? format_hex(c.values[t]) : "?");
            out << '\n';
        }
        out << "@end\n";
    }
}

std::vector<AugmentedSeries> read_augmented(std::istream& in) {
    std::vector<AugmentedSeries> set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream hs(line);
        std::string tag, gamma_hex, skip, active;
        std::uint64_t seed = 0;
        AugmentedSeries s;
        if (!(hs >> tag >> s.series_id >> gamma_hex >> seed >> s.k >> skip >> active) || tag != "@series")
            throw ParseError("expected @series header", line_no);
        s.gamma = parse_hex(gamma_hex);
        s.skip_set = split_leads(skip);
        for (auto lead : split_leads(active)) s.columns.push_back({lead, {}, 0.0});
        bool closed = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (line == "@end") {
                closed = true;
                break;
            }
            std::istringstream rs(line);
            std::size_t t = 0;
            std::string tok;
            if (!(rs >> t >> tok) || t != s.y.size() + 1) throw ParseError("bad row in series " + s.series_id, line_no);
            s.y.push_back(parse_hex(tok));
            for (auto& c : s.columns) {
                if (!(rs >> tok)) throw ParseError("missing covariate value", line_no);
                if (tok == "?") continue;
                if (c.values.size() != t - 1) throw ParseError("defined value after an undefined one", line_no);
                c.values.push_back(parse_hex(tok));
            }
        }
        if (!closed) throw ParseError("series " + s.series_id + " not terminated by @end", line_no);
        std::tie(s.mu, s.sigma) = mean_and_std(s.y);
        for (auto& c : s.columns) {
            if (c.values.size() + c.lead != s.y.size())
                throw ParseError("covariate lead " + std::to_string(c.lead) + " has wrong length", line_no);
            try {
                c.realized_pcc = pearson_cc(c.values, std::span<const double>(s.y).subspan(c.lead));
            } catch (const ArgumentError&) {
                c.realized_pcc = std::numeric_limits<double>::quiet_NaN();
            }
        }
        set.push_back(std::move(s));
    }
    return set;
}

} // namespace lstmcov
