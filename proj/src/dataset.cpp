#include "emde/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "emde/common.hpp"
#include "emde/logging.hpp"

namespace emde {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

void write_field(std::ostream& os, const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) {
        os << field;
        return;
    }
    os << '"';
    for (char c : field) {
        if (c == '"') os << '"';
        os << c;
    }
    os << '"';
}

std::map<std::string, std::size_t> header_index(const std::string& header_line) {
    std::map<std::string, std::size_t> index;
    const auto names = split_csv_line(strip_cr(header_line));
    for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], i);
    return index;
}

std::size_t require_column(const std::map<std::string, std::size_t>& index, const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw error("missing column '" + name + "'");
    return it->second;
}

double days_between(date from, date to) { return static_cast<double>((to - from).count()); }

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw error("line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

constexpr std::array<std::string_view, 9> kReservationColumns = {
    "user_id", "checkin", "checkout", "city_id", "device_class", "affiliate_id", "booker_country", "hotel_country",
    "utrip_id"};

}  // namespace

date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { return error("unparseable date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
    auto parse = [&](std::string_view part, auto& out) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc() || ptr != part.data() + part.size()) throw bad();
    };
    parse(text.substr(0, 4), y);
    parse(text.substr(5, 2), m);
    parse(text.substr(8, 2), d);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw bad();
    return date{ymd};
}

std::string format_date(date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<city_id> trip::cities() const {
    std::vector<city_id> out;
    out.reserve(reservations.size());
    for (const auto& r : reservations) out.push_back(r.city);
    return out;
}

parse_result parse_trips(std::istream& csv, const parse_options& options) {
    std::string line;
    if (!std::getline(csv, line)) throw error("empty CSV: header row missing");
    const auto index = header_index(line);
    std::array<std::size_t, kReservationColumns.size()> col{};
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = require_column(index, std::string(kReservationColumns[i]));
    const std::size_t needed = *std::max_element(col.begin(), col.end()) + 1;

    parse_result result;
    std::unordered_map<std::string, std::size_t> trip_slot;
    std::size_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        const auto text = strip_cr(line);
        if (text.empty()) continue;
        try {
            const auto f = split_csv_line(text);
            if (f.size() < needed) throw error("expected at least " + std::to_string(needed) + " fields");
            reservation r;
            r.user_id = f[col[0]];
            r.checkin = parse_date(f[col[1]]);
            r.checkout = parse_date(f[col[2]]);
            r.city = f[col[3]];
            r.device_class = f[col[4]];
            r.affiliate_id = f[col[5]];
            r.booker_country = f[col[6]];
            r.hotel_country = f[col[7]];
            r.trip_id = f[col[8]];
            if (r.checkout < r.checkin) throw error("checkout precedes checkin");
            if (r.trip_id.empty() || r.user_id.empty()) throw error("empty id");
            auto [it, inserted] = trip_slot.emplace(r.trip_id, result.trips.size());
            if (inserted) result.trips.push_back(trip{r.trip_id, {}});
            result.trips[it->second].reservations.push_back(std::move(r));
        } catch (const error& e) {
            if (options.fail_fast) throw error("line " + std::to_string(line_no) + ": " + e.what());
            result.errors.push_back({line_no, e.what()});
        }
    }
    for (auto& t : result.trips)
        std::stable_sort(t.reservations.begin(), t.reservations.end(),
                         [](const reservation& a, const reservation& b) { return a.checkin < b.checkin; });
    return result;
}

parse_result parse_trips_file(const std::filesystem::path& path, const parse_options& options) {
    std::ifstream is(path);
    if (!is) throw error("cannot open " + path.string());
    return parse_trips(is, options);
}

void write_trips(std::ostream& csv, const std::vector<trip>& trips) {
    for (std::size_t i = 0; i < kReservationColumns.size(); ++i) csv << (i ? "," : "") << kReservationColumns[i];
    csv << '\n';
    for (const auto& t : trips) {
        for (const auto& r : t.reservations) {
            write_field(csv, r.user_id);
            csv << ',' << format_date(r.checkin) << ',' << format_date(r.checkout) << ',';
            write_field(csv, r.city);
            csv << ',';
            write_field(csv, r.device_class);
            csv << ',';
            write_field(csv, r.affiliate_id);
            csv << ',';
            write_field(csv, r.booker_country);
            csv << ',';
            write_field(csv, r.hotel_country);
            csv << ',';
            write_field(csv, t.id);
            csv << '\n';
        }
    }
}

void write_trips_file(const std::filesystem::path& path, const std::vector<trip>& trips) {
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path.string());
    write_trips(os, trips);
    if (!os) throw error("write failed: " + path.string());
}

trip_example featurize(const trip& t, std::size_t k) {
    if (k < 1 || k >= t.length())
        throw error("featurize: position " + std::to_string(k) + " outside [1, " + std::to_string(t.length()) + ")");
    const auto& res = t.reservations;
    const reservation& target = res[k];
    const reservation& prev = res[k - 1];

    trip_example ex;
    ex.trip_id = t.id;
    ex.prefix.reserve(k);
    for (std::size_t i = 0; i < k; ++i) ex.prefix.push_back(res[i].city);
    ex.target = target.city;
    ex.is_final = k + 1 == t.length();
    ex.trip_length = t.length();

    auto non_negative = [&](double days, const char* what) {
        if (days < 0) {
            log_warning("trip " + t.id + ": negative " + what + " clamped to 0");
            return 0.0;
        }
        return days;
    };

    double gap_sum = 0.0;
    for (std::size_t i = 1; i < k; ++i)
        gap_sum += non_negative(days_between(res[i - 1].checkout, res[i].checkin), "booking gap");

    const std::unordered_set<std::string> unique(ex.prefix.begin(), ex.prefix.end());
    ex.numerical = {
        days_between(target.checkin, target.checkout),
        non_negative(days_between(res.front().checkin, target.checkin), "days since start"),
        non_negative(days_between(target.checkin, res.back().checkout), "days till end"),
        non_negative(days_between(prev.checkout, target.checkin), "days since last booking"),
        static_cast<double>(k),
        static_cast<double>(unique.size()),
        static_cast<double>(t.length()),
        k > 1 ? gap_sum / static_cast<double>(k - 1) : 0.0,
    };

    const std::chrono::year_month_day ymd{target.checkin};
    ex.categorical = {
        target.device_class,
        target.booker_country,
        prev.hotel_country,
        target.affiliate_id,
        std::to_string(std::chrono::weekday{target.checkin}.c_encoding()),
        std::to_string(std::chrono::weekday{target.checkout}.c_encoding()),
        std::to_string(static_cast<unsigned>(ymd.month())),
        std::to_string(static_cast<int>(ymd.year())),
    };
    return ex;
}

std::vector<trip_example> augment(const trip& t) {
    std::vector<trip_example> out;
    if (t.length() < 2) return out;
    out.reserve(t.length() - 1);
    for (std::size_t k = 1; k < t.length(); ++k) out.push_back(featurize(t, k));
    return out;
}

split_result split(const std::vector<trip>& trips, double valid_fraction, std::uint64_t seed) {
    if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) throw error("valid fraction must lie in [0, 1)");

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < trips.size(); ++i)
        if (trips[i].length() >= 2) eligible.push_back(i);
    const auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(eligible.size())));

    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    std::vector<std::size_t> sampled(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_valid));
    std::vector<char> held_out(trips.size(), 0);
    for (std::size_t i : sampled) held_out[i] = 1;

    // Cities the training side sees: everything except the finals of held-out trips.
    std::unordered_set<city_id> train_cities;
    for (std::size_t i = 0; i < trips.size(); ++i) {
        const auto& r = trips[i].reservations;
        const std::size_t visible = held_out[i] ? r.size() - 1 : r.size();
        for (std::size_t j = 0; j < visible; ++j) train_cities.insert(r[j].city);
    }
    split_result result;
    for (std::size_t i : sampled) {
        const city_id& final_city = trips[i].reservations.back().city;
        if (!train_cities.contains(final_city)) {
            held_out[i] = 0;
            train_cities.insert(final_city);
            ++result.dropped;
            log_warning("trip " + trips[i].id + " ends in a city unseen in training; kept in train");
        }
    }

    for (std::size_t i = 0; i < trips.size(); ++i) {
        auto examples = augment(trips[i]);
        if (held_out[i] && !examples.empty()) {
            result.valid.push_back(std::move(examples.back()));
            result.valid_trip_ids.insert(trips[i].id);
            examples.pop_back();
        }
        for (auto& e : examples) result.train.push_back(std::move(e));
    }
    return result;
}

std::vector<std::vector<city_id>> graph_sequences(const std::vector<trip>& trips,
                                                  const std::set<std::string>& holdout_trip_ids) {
    std::vector<std::vector<city_id>> seqs;
    seqs.reserve(trips.size());
    for (const auto& t : trips) {
        auto cities = t.cities();
        if (holdout_trip_ids.contains(t.id) && !cities.empty()) cities.pop_back();
        if (!cities.empty()) seqs.push_back(std::move(cities));
    }
    return seqs;
}

void write_examples(std::ostream& csv, const std::vector<trip_example>& examples) {
    csv << "utrip_id,prefix,target_city,is_final,trip_length";
    for (auto name : kNumericalNames) csv << ',' << name;
    for (auto name : kCategoricalNames) csv << ',' << name;
    csv << '\n';
    for (const auto& ex : examples) {
        write_field(csv, ex.trip_id);
        csv << ',';
        std::string prefix;
        for (std::size_t i = 0; i < ex.prefix.size(); ++i) {
            if (ex.prefix[i].find(' ') != std::string::npos) throw error("city id contains a space: " + ex.prefix[i]);
            prefix += (i ? " " : "") + ex.prefix[i];
        }
        write_field(csv, prefix);
        csv << ',';
        write_field(csv, ex.target);
        csv << ',' << (ex.is_final ? 1 : 0) << ',' << ex.trip_length;
        for (double v : ex.numerical) csv << ',' << format_double(v);
        for (const auto& c : ex.categorical) {
            csv << ',';
            write_field(csv, c);
        }
        csv << '\n';
    }
}

std::vector<trip_example> read_examples(std::istream& csv) {
    std::string line;
    if (!std::getline(csv, line)) throw error("empty examples file");
    const auto index = header_index(line);
    const std::size_t c_trip = require_column(index, "utrip_id");
    const std::size_t c_prefix = require_column(index, "prefix");
    const std::size_t c_target = require_column(index, "target_city");
    const std::size_t c_final = require_column(index, "is_final");
    const std::size_t c_length = require_column(index, "trip_length");
    std::array<std::size_t, kNumericalFeatures> c_num{};
    std::array<std::size_t, kCategoricalFeatures> c_cat{};
    for (std::size_t i = 0; i < kNumericalFeatures; ++i) c_num[i] = require_column(index, std::string(kNumericalNames[i]));
    for (std::size_t i = 0; i < kCategoricalFeatures; ++i)
        c_cat[i] = require_column(index, std::string(kCategoricalNames[i]));

    std::vector<trip_example> out;
    std::size_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        const auto text = strip_cr(line);
        if (text.empty()) continue;
        const auto f = split_csv_line(text);
        if (f.size() < index.size()) throw error("line " + std::to_string(line_no) + ": too few fields");
        trip_example ex;
        ex.trip_id = f[c_trip];
        std::istringstream ps(f[c_prefix]);
        for (std::string city; ps >> city;) ex.prefix.push_back(city);
        if (ex.prefix.empty()) throw error("line " + std::to_string(line_no) + ": empty prefix");
        ex.target = f[c_target];
        ex.is_final = f[c_final] == "1";
        ex.trip_length = static_cast<std::size_t>(parse_double(f[c_length], line_no));
        for (std::size_t i = 0; i < kNumericalFeatures; ++i) ex.numerical[i] = parse_double(f[c_num[i]], line_no);
        for (std::size_t i = 0; i < kCategoricalFeatures; ++i) ex.categorical[i] = f[c_cat[i]];
        out.push_back(std::move(ex));
    }
    return out;
}

void write_examples_file(const std::filesystem::path& path, const std::vector<trip_example>& examples) {
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path.string());
    write_examples(os, examples);
    if (!os) throw error("write failed: " + path.string());
}

std::vector<trip_example> read_examples_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw error("cannot open " + path.string());
    return read_examples(is);
}

std::vector<trip> generate_synthetic(const synthetic_config& cfg) {
    if (cfg.countries < 1 || cfg.cities < cfg.countries) throw error("synthetic: need cities >= countries >= 1");
    if (!(cfg.return_probability >= 0.0 && cfg.return_probability <= 1.0))
        throw error("synthetic: return probability must lie in [0, 1]");
    if (cfg.min_length < 1) throw error("synthetic: min_length must be positive");

    static constexpr std::array<const char*, 5> kBookerCountries = {"Gondal", "Elbonia", "Tcherkistan", "Bartovia",
                                                                    "Fook Island"};
    // Probability that a trip heads clockwise, per booker country.
    static constexpr std::array<double, 5> kClockwise = {0.9, 0.85, 0.1, 0.15, 0.5};
    static constexpr std::array<const char*, 3> kDevices = {"desktop", "mobile", "tablet"};

    const std::size_t V = cfg.cities;
    std::mt19937_64 rng(cfg.seed);

    // Log-normal start popularity keyed per city.
    std::vector<double> popularity(V);
    {
        std::normal_distribution<double> g(0.0, 1.0);
        std::mt19937_64 prng(mix64(cfg.seed, 0x706f70, 0));
        for (double& w : popularity) w = std::exp(g(prng));
    }
    std::discrete_distribution<std::size_t> start_city(popularity.begin(), popularity.end());
    std::discrete_distribution<std::size_t> device({0.5, 0.4, 0.1});
    std::discrete_distribution<std::size_t> booker({0.3, 0.25, 0.2, 0.15, 0.1});
    std::uniform_int_distribution<int> affiliate(1, 50);
    std::uniform_int_distribution<int> stay(1, 7);
    std::uniform_int_distribution<int> start_day(0, 364);
    std::uniform_int_distribution<int> gap_days(1, 3);
    std::bernoulli_distribution has_gap(0.2);
    std::geometric_distribution<int> stride(0.55);
    const double extra_mean = std::max(0.0, cfg.mean_length - static_cast<double>(cfg.min_length));
    std::geometric_distribution<int> extra_length(1.0 / (1.0 + extra_mean));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> user(1, std::max<std::size_t>(1, cfg.trips * 9 / 10));

    auto country_of = [&](std::size_t c) { return c * cfg.countries / V; };
    auto country_name = [](std::size_t k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "country_%03zu", k);
        return std::string(buf);
    };
    auto city_name = [](std::size_t c) { return std::to_string(c + 1); };
    const date epoch{std::chrono::year{2016} / 1 / 1};

    std::vector<trip> trips;
    trips.reserve(cfg.trips);
    std::map<std::size_t, std::size_t> trips_per_user;
    for (std::size_t t = 0; t < cfg.trips; ++t) {
        const std::size_t len = cfg.min_length + static_cast<std::size_t>(extra_mean > 0 ? extra_length(rng) : 0);
        const std::size_t u = user(rng);
        const std::size_t b = booker(rng);
        const std::string dev = kDevices[device(rng)];
        const std::string aff = std::to_string(affiliate(rng));
        const int heading = unit(rng) < kClockwise[b] ? 1 : -1;
        // Round trips turn back halfway and end where they started.
        const bool round_trip = len >= 2 && unit(rng) < cfg.return_probability;

        trip tr;
        tr.id = std::to_string(u) + "_" + std::to_string(++trips_per_user[u]);
        std::vector<std::size_t> path{start_city(rng)};
        std::vector<int> gaps{0};
        for (std::size_t i = 1; i < len; ++i) {
            const int gap = has_gap(rng) ? gap_days(rng) : 0;
            const bool homebound = round_trip && 2 * i + 1 > len;
            const int dir = homebound ? -heading : unit(rng) < 0.85 ? heading : -heading;
            const auto step = static_cast<long long>(1 + stride(rng) + (gap > 0 ? 2 : 0));
            const auto next = (static_cast<long long>(path.back()) + dir * step) % static_cast<long long>(V);
            path.push_back(static_cast<std::size_t>((next + static_cast<long long>(V)) % static_cast<long long>(V)));
            gaps.push_back(gap);
        }
        if (round_trip) {
            path.back() = path.front();
        } else if (V > 1 && path.back() == path.front()) {
            // only round trips end where they began
            path.back() = static_cast<std::size_t>((static_cast<long long>(path.back()) + heading + static_cast<long long>(V)) %
                                                   static_cast<long long>(V));
        }

        date checkin = epoch + std::chrono::days{start_day(rng)};
        for (std::size_t i = 0; i < len; ++i) {
            checkin += std::chrono::days{gaps[i]};
            reservation r;
            r.user_id = std::to_string(u);
            r.trip_id = tr.id;
            r.checkin = checkin;
            r.checkout = checkin + std::chrono::days{stay(rng)};
            r.affiliate_id = aff;
            r.device_class = dev;
            r.booker_country = kBookerCountries[b];
            r.hotel_country = country_name(country_of(path[i]));
            r.city = city_name(path[i]);
            checkin = r.checkout;
            tr.reservations.push_back(std::move(r));
        }
        trips.push_back(std::move(tr));
    }
    return trips;
}

}  // namespace emde
