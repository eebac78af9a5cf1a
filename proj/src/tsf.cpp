#include "lstmcov/tsf.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lstmcov/errors.hpp"

namespace lstmcov {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_bool(std::string_view token, std::size_t line) {
    const auto t = lower(token);
    if (t == "true") return true;
    if (t == "false") return false;
    throw ParseError("expected true/false, got '" + std::string(token) + "'", line);
}

std::optional<double> parse_real(std::string_view token) {
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

int parse_int_field(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ArgumentError("bad integer field");
    return v;
}

} // namespace

Timestamp Timestamp::parse(std::string_view text) {
    // YYYY-MM-DD HH-mm-ss
    const auto t = trim(text);
    const auto space = t.find(' ');
    if (space == std::string_view::npos) throw ArgumentError("timestamp without time part: " + std::string(t));
    const auto date = split(t.substr(0, space), '-');
    const auto time = split(trim(t.substr(space + 1)), '-');
    if (date.size() != 3 || time.size() != 3) throw ArgumentError("malformed timestamp: " + std::string(t));
    Timestamp ts;
    try {
        ts.year = parse_int_field(date[0]);
        ts.month = parse_int_field(date[1]);
        ts.day = parse_int_field(date[2]);
        ts.hour = parse_int_field(time[0]);
        ts.minute = parse_int_field(time[1]);
        ts.second = parse_int_field(time[2]);
    } catch (const ArgumentError&) {
        throw ArgumentError("malformed timestamp: " + std::string(t));
    }
    if (ts.month < 1 || ts.month > 12 || ts.day < 1 || ts.day > 31 || ts.hour < 0 || ts.hour > 23 ||
        ts.minute < 0 || ts.minute > 59 || ts.second < 0 || ts.second > 60)
        throw ArgumentError("timestamp field out of range: " + std::string(t));
    return ts;
}

std::string Timestamp::to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d-%02d-%02d", year, month, day, hour, minute, second);
    return buf;
}

Frequency parse_frequency(std::string_view token) {
    const auto t = lower(trim(token));
    if (t == "hourly") return Frequency::hourly;
    if (t == "daily") return Frequency::daily;
    if (t == "weekly") return Frequency::weekly;
    if (t == "monthly") return Frequency::monthly;
    if (t == "quarterly") return Frequency::quarterly;
    if (t == "yearly") return Frequency::yearly;
    throw ArgumentError("unsupported frequency '" + std::string(token) + "'");
}

std::string_view to_string(Frequency f) {
    switch (f) {
    case Frequency::hourly: return "hourly";
    case Frequency::daily: return "daily";
    case Frequency::weekly: return "weekly";
    case Frequency::monthly: return "monthly";
    case Frequency::quarterly: return "quarterly";
    case Frequency::yearly: return "yearly";
    }
    return "?";
}

std::string canonical_dataset_name(std::string_view name) {
    const auto n = lower(trim(name));
    for (const char* known : {"hospital", "tourism", "traffic", "electricity"}) {
        if (n.find(known) != std::string::npos) return known;
    }
    return n;
}

DatasetConstants dataset_defaults(std::string_view name) {
    const auto n = lower(trim(name));
    // Traffic is weekly; d = 8 tiles the 8H = 64 seg-lstm context.
    if (n == "hospital") return {12, 12, 3, 15};
    if (n == "tourism") return {24, 12, 3, 15};
    if (n == "traffic") return {8, 8, 8, 65};
    if (n == "electricity") return {168, 24, 3, 210};
    throw ConfigError("no default constants for dataset '" + std::string(name) + "'");
}

namespace {

struct Header {
    std::string relation;
    std::vector<Attribute> attributes;
    std::optional<Frequency> frequency;
    std::optional<std::size_t> horizon;
    bool missing = false;
    bool equal_length = false;
};

struct RawParse {
    Header header;
    std::vector<TimeSeriesRecord> records;
    std::vector<std::string> dropped;
};

RawParse parse_raw(std::istream& in, const DatasetPolicy& policy) {
    RawParse out;
    Header& h = out.header;
    bool in_data = false;
    std::string raw;
    std::size_t line_no = 0;
    std::ptrdiff_t id_attr = -1;
    std::ptrdiff_t date_attr = -1;

    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (!in_data) {
            if (line.front() != '@') throw ParseError("data line before @data", line_no);
            const auto sp = line.find_first_of(" \t");
            const auto key = lower(line.substr(0, sp));
            const auto rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp + 1));
            if (key == "@relation") {
                if (rest.empty()) throw ParseError("@relation without a name", line_no);
                h.relation = std::string(rest);
            } else if (key == "@attribute") {
                const auto parts_sp = rest.find_first_of(" \t");
                if (parts_sp == std::string_view::npos) throw ParseError("@attribute needs <name> <type>", line_no);
                const auto name = rest.substr(0, parts_sp);
                const auto type = lower(trim(rest.substr(parts_sp + 1)));
                AttributeKind kind;
                if (type == "string") kind = AttributeKind::string;
                else if (type == "date") kind = AttributeKind::date;
                else if (type == "numeric") kind = AttributeKind::numeric;
                else throw ParseError("unknown attribute type '" + type + "'", line_no);
                h.attributes.push_back({std::string(name), kind});
            } else if (key == "@frequency") {
                try {
                    h.frequency = parse_frequency(rest);
                } catch (const ArgumentError& e) {
                    throw ParseError(e.what(), line_no);
                }
            } else if (key == "@horizon") {
                const auto v = parse_real(rest);
                if (!v || *v < 1 || *v != static_cast<double>(static_cast<std::size_t>(*v)))
                    throw ParseError("@horizon must be a positive integer", line_no);
                h.horizon = static_cast<std::size_t>(*v);
            } else if (key == "@missing") {
                h.missing = parse_bool(rest, line_no);
            } else if (key == "@equallength") {
                h.equal_length = parse_bool(rest, line_no);
            } else if (key == "@data") {
                in_data = true;
                for (std::size_t i = 0; i < h.attributes.size(); ++i) {
                    if (id_attr < 0 && (h.attributes[i].name == "series_name" ||
                                        h.attributes[i].kind == AttributeKind::string))
                        id_attr = static_cast<std::ptrdiff_t>(i);
                    if (date_attr < 0 && h.attributes[i].kind == AttributeKind::date)
                        date_attr = static_cast<std::ptrdiff_t>(i);
                }
                for (std::size_t i = 0; i < h.attributes.size(); ++i)
                    if (h.attributes[i].name == "series_name") id_attr = static_cast<std::ptrdiff_t>(i);
            } else {
                throw ParseError("unknown header line '" + std::string(line) + "'", line_no);
            }
            continue;
        }

        if (line.front() == '@') throw ParseError("header line after @data", line_no);
        const auto fields = split(line, ':');
        if (fields.size() != h.attributes.size() + 1)
            throw ParseError("expected " + std::to_string(h.attributes.size() + 1) + " ':'-separated fields, got " +
                                 std::to_string(fields.size()),
                             line_no);

        TimeSeriesRecord rec;
        for (std::size_t i = 0; i < h.attributes.size(); ++i) {
            const auto f = trim(fields[i]);
            if (h.attributes[i].kind == AttributeKind::numeric && !parse_real(f))
                throw ParseError("numeric attribute '" + h.attributes[i].name + "' is not a number", line_no);
            if (h.attributes[i].kind == AttributeKind::date) {
                try {
                    const auto ts = Timestamp::parse(f);
                    if (static_cast<std::ptrdiff_t>(i) == date_attr) rec.start_time = ts;
                } catch (const ArgumentError& e) {
                    throw ParseError(e.what(), line_no);
                }
            }
            rec.attribute_values.emplace_back(f);
        }
        rec.series_id = id_attr >= 0 ? rec.attribute_values[static_cast<std::size_t>(id_attr)]
                                     : "T" + std::to_string(out.records.size() + out.dropped.size() + 1);

        const auto value_field = trim(fields.back());
        if (value_field.empty()) throw ParseError("series '" + rec.series_id + "' has no values", line_no);
        bool has_missing = false;
        for (const auto token_raw : split(value_field, ',')) {
            const auto token = trim(token_raw);
            if (token == "?") {
                has_missing = true;
                continue;
            }
            const auto v = parse_real(token);
            if (!v) throw ParseError("bad value '" + std::string(token) + "' in series '" + rec.series_id + "'", line_no);
            rec.values.push_back(*v);
        }
        if (has_missing) {
            if (policy.missing_value_action == MissingValueAction::reject_file)
                throw ParseError("missing value in series '" + rec.series_id + "'", line_no);
            out.dropped.push_back(rec.series_id + ": missing values");
            continue;
        }
        if (rec.values.empty()) throw ParseError("series '" + rec.series_id + "' has no values", line_no);
        if (rec.values.size() < policy.min_length) {
            out.dropped.push_back(rec.series_id + ": length " + std::to_string(rec.values.size()) + " < " +
                                  std::to_string(policy.min_length));
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    if (!in_data) throw ParseError("no @data section", line_no == 0 ? 1 : line_no);
    return out;
}

TsfDataset assemble(RawParse raw, const DatasetConstants& c) {
    if (c.horizon < 1 || c.seasonality < 1 || c.base_context_length < 1 || c.seg_context_multiplier < 1)
        throw ConfigError("dataset constants must all be >= 1");
    TsfDataset ds;
    ds.meta.name = raw.header.relation.empty() ? std::string("unnamed") : raw.header.relation;
    ds.meta.frequency = raw.header.frequency;
    ds.meta.series_count = raw.records.size();
    ds.meta.horizon = c.horizon;
    ds.meta.context_length = c.base_context_length;
    ds.meta.seasonality = c.seasonality;
    ds.meta.attributes = std::move(raw.header.attributes);
    ds.meta.file_horizon = raw.header.horizon;
    ds.meta.file_missing = raw.header.missing;
    ds.meta.file_equal_length = raw.header.equal_length;
    ds.records = std::move(raw.records);
    ds.dropped = std::move(raw.dropped);
    return ds;
}

} // namespace

TsfDataset parse_tsf(std::istream& in, const DatasetPolicy& policy, const DatasetConstants& constants) {
    return assemble(parse_raw(in, policy), constants);
}

TsfDataset parse_tsf(std::istream& in, const DatasetPolicy& policy) {
    auto raw = parse_raw(in, policy);
    const auto constants = dataset_defaults(canonical_dataset_name(raw.header.relation));
    return assemble(std::move(raw), constants);
}

TsfDataset load_tsf(const std::filesystem::path& path, const DatasetPolicy& policy,
                    const std::optional<DatasetConstants>& constants) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string());
    auto raw = parse_raw(in, policy);
    if (constants) return assemble(std::move(raw), *constants);
    DatasetConstants resolved;
    try {
        resolved = dataset_defaults(canonical_dataset_name(raw.header.relation));
    } catch (const ConfigError&) {
        resolved = dataset_defaults(canonical_dataset_name(path.stem().string()));
    }
    return assemble(std::move(raw), resolved);
}

void write_tsf(std::ostream& out, const DatasetMeta& meta, const std::vector<TimeSeriesRecord>& records) {
    out << "@relation " << meta.name << '\n';
    for (const auto& a : meta.attributes) {
        const char* kind = a.kind == AttributeKind::string ? "string" : a.kind == AttributeKind::date ? "date" : "numeric";
        out << "@attribute " << a.name << ' ' << kind << '\n';
    }
    if (meta.frequency) out << "@frequency " << to_string(*meta.frequency) << '\n';
    if (meta.file_horizon) out << "@horizon " << *meta.file_horizon << '\n';
    out << "@missing " << (meta.file_missing ? "true" : "false") << '\n';
    out << "@equallength " << (meta.file_equal_length ? "true" : "false") << '\n';
    out << "@data\n";
    char buf[64];
    for (const auto& r : records) {
        if (r.attribute_values.size() != meta.attributes.size())
            throw ArgumentError("record '" + r.series_id + "' attribute count does not match header");
        for (const auto& a : r.attribute_values) out << a << ':';
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, r.values[i]);
            (void)ec;
            if (i) out << ',';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

} // namespace lstmcov
