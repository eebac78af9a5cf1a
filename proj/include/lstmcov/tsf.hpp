#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lstmcov {

/// Monash `YYYY-MM-DD HH-mm-ss` timestamp. Parsed and echoed, never used by the models.
struct Timestamp {
    int year = 0;
    int month = 0;
    int day = 0;
    int hour = 0;
    int minute = 0;
    int second = 0;

    static Timestamp parse(std::string_view text);
    std::string to_string() const;
    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct TimeSeriesRecord {
    std::string series_id;
    std::optional<Timestamp> start_time;
    /// Raw attribute fields in header order (the id and timestamp included).
    std::vector<std::string> attribute_values;
    std::vector<double> values;

    std::size_t length() const noexcept { return values.size(); }
};

enum class Frequency { hourly, daily, weekly, monthly, quarterly, yearly };

Frequency parse_frequency(std::string_view token);
std::string_view to_string(Frequency f);

enum class AttributeKind { string, date, numeric };

struct Attribute {
    std::string name;
    AttributeKind kind;
};

/// Per-dataset experimental constants.
struct DatasetConstants {
    std::size_t horizon;                 // H
    std::size_t seasonality;             // d, the seg-lstm segment length
    std::size_t seg_context_multiplier;  // seg-lstm C = multiplier * H
    std::size_t base_context_length;     // base-lstm C
};

/// Constants for hospital, tourism, traffic and electricity. Throws ConfigError otherwise.
DatasetConstants dataset_defaults(std::string_view name);

/// Maps a relation name or file stem such as "traffic_weekly" onto one of the
/// four benchmark names; returns the lowercase input when nothing matches.
std::string canonical_dataset_name(std::string_view name);

struct DatasetMeta {
    std::string name;
    std::optional<Frequency> frequency;  // `@frequency`, when present
    std::size_t series_count = 0;
    std::size_t horizon = 0;
    std::size_t context_length = 0;
    std::size_t seasonality = 0;
    std::vector<Attribute> attributes;
    std::optional<std::size_t> file_horizon;  // `@horizon`, when present
    bool file_missing = false;                // `@missing`
    bool file_equal_length = false;           // `@equallength`
};

enum class MissingValueAction { reject_series, reject_file };

/// Ingestion policy. No defaults: every caller states how short series and
/// missing markers are handled.
struct DatasetPolicy {
    std::size_t min_length;
    MissingValueAction missing_value_action;
};

struct TsfDataset {
    DatasetMeta meta;
    std::vector<TimeSeriesRecord> records;
    /// Series ids dropped by the policy, with the reason.
    std::vector<std::string> dropped;
};

/// Parses a Monash `.tsf` document. `constants` supplies H, C and d; the
/// overload without it resolves them from the `@relation` name.
TsfDataset parse_tsf(std::istream& in, const DatasetPolicy& policy, const DatasetConstants& constants);
TsfDataset parse_tsf(std::istream& in, const DatasetPolicy& policy);

TsfDataset load_tsf(const std::filesystem::path& path, const DatasetPolicy& policy,
                    const std::optional<DatasetConstants>& constants = std::nullopt);

/// Writes records back out in `.tsf` form. Values use shortest round-trip formatting.
void write_tsf(std::ostream& out, const DatasetMeta& meta, const std::vector<TimeSeriesRecord>& records);

} // namespace lstmcov
