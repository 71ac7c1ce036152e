#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emde/graph.hpp"

namespace emde {

using date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; throws on anything else.
date parse_date(std::string_view text);
std::string format_date(date d);

struct reservation {
    std::string user_id;
    std::string trip_id;
    date checkin{};
    date checkout{};
    std::string affiliate_id;
    std::string device_class;
    std::string booker_country;
    std::string hotel_country;
    city_id city;
};

struct trip {
    std::string id;
    std::vector<reservation> reservations;  // chronological

    std::size_t length() const noexcept { return reservations.size(); }
    std::vector<city_id> cities() const;
};

inline constexpr std::size_t kNumericalFeatures = 8;
inline constexpr std::size_t kCategoricalFeatures = 8;

inline constexpr std::array<std::string_view, kNumericalFeatures> kNumericalNames = {
    "stay_length",  "days_since_start",     "days_till_end", "days_since_last",
    "cities_so_far", "unique_cities_so_far", "trip_length",   "mean_gap_days"};

inline constexpr std::array<std::string_view, kCategoricalFeatures> kCategoricalNames = {
    "device_class",    "booker_country",   "prev_hotel_country", "affiliate_id",
    "checkin_weekday", "checkout_weekday", "month",              "year"};

/// One prediction record: the known prefix of a trip and the city that follows it.
/// Numerical features are raw here; standardization belongs to the trained model.
struct trip_example {
    std::string trip_id;
    std::vector<city_id> prefix;
    city_id target;  // empty when unknown (test-time records)
    bool is_final = false;
    std::size_t trip_length = 0;
    std::array<double, kNumericalFeatures> numerical{};
    std::array<std::string, kCategoricalFeatures> categorical{};

    bool is_return() const { return !target.empty() && target == prefix.front(); }
    bool operator==(const trip_example&) const = default;
};

struct parse_options {
    bool fail_fast = true;
};

struct row_error {
    std::size_t line = 0;
    std::string message;
};

struct parse_result {
    std::vector<trip> trips;  // in order of first appearance
    std::vector<row_error> errors;
};

/// Reads the challenge reservation CSV. Columns are located by header name; a
/// missing column is fatal, a malformed row throws (fail_fast) or is reported.
parse_result parse_trips(std::istream& csv, const parse_options& options = {});
parse_result parse_trips_file(const std::filesystem::path& path, const parse_options& options = {});

void write_trips(std::ostream& csv, const std::vector<trip>& trips);
void write_trips_file(const std::filesystem::path& path, const std::vector<trip>& trips);

/// Example for predicting reservation `k` (0-based, 1 <= k < length) from reservations [0, k).
trip_example featurize(const trip& t, std::size_t k);

/// length-1 examples, the last one flagged final.
std::vector<trip_example> augment(const trip& t);

struct split_result {
    std::vector<trip_example> train;
    std::vector<trip_example> valid;     // final targets of held-out trips only
    std::set<std::string> valid_trip_ids;
    std::size_t dropped = 0;             // sampled trips returned to train (unseen final city)
};

split_result split(const std::vector<trip>& trips, double valid_fraction, std::uint64_t seed);

/// City sequences for graph construction, omitting the final city of held-out trips.
std::vector<std::vector<city_id>> graph_sequences(const std::vector<trip>& trips,
                                                  const std::set<std::string>& holdout_trip_ids);

void write_examples(std::ostream& csv, const std::vector<trip_example>& examples);
std::vector<trip_example> read_examples(std::istream& csv);
void write_examples_file(const std::filesystem::path& path, const std::vector<trip_example>& examples);
std::vector<trip_example> read_examples_file(const std::filesystem::path& path);

struct synthetic_config {
    std::size_t cities = 2000;
    std::size_t countries = 20;
    std::size_t trips = 10000;
    double mean_length = 5.0;
    std::size_t min_length = 4;
    double return_probability = 0.15;
    std::uint64_t seed = 0;
};

/// Ring-world trips: cities sit on a ring split into contiguous countries; trips are
/// directed random walks with geometric steps whose direction leans on the booker
/// country and whose stride grows after gap days. With `return_probability` a trip is
/// a round trip: it heads back after its midpoint and its last city is the first.
std::vector<trip> generate_synthetic(const synthetic_config& config);

}  // namespace emde
