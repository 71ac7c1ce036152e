#include <doctest.h>

#include <set>
#include <sstream>

#include "emde/common.hpp"
#include "emde/dataset.hpp"

using namespace emde;

namespace {

const char* kHeader = "user_id,checkin,checkout,city_id,device_class,affiliate_id,booker_country,hotel_country,utrip_id\n";

trip make_trip(const std::string& id, const std::vector<std::string>& cities) {
    trip t;
    t.id = id;
    date d = parse_date("2016-01-01");
    for (const auto& c : cities) {
        reservation r;
        r.user_id = "u";
        r.trip_id = id;
        r.checkin = d;
        r.checkout = d + std::chrono::days{2};
        r.city = c;
        r.hotel_country = "X";
        r.booker_country = "B";
        r.device_class = "mobile";
        r.affiliate_id = "9";
        t.reservations.push_back(r);
        d = r.checkout;
    }
    return t;
}

}  // namespace

TEST_CASE("dates") {
    CHECK(format_date(parse_date("2016-02-29")) == "2016-02-29");
    CHECK_THROWS_AS(parse_date("2016-02-30"), error);
    CHECK_THROWS_AS(parse_date("16-1-1"), error);
    CHECK_THROWS_AS(parse_date(""), error);
}

TEST_CASE("rows group into chronological trips") {
    std::istringstream csv(std::string(kHeader) +
                           "1,2016-01-05,2016-01-06,30,mobile,7,Gondal,X,1_1\n"
                           "1,2016-01-01,2016-01-03,10,mobile,7,Gondal,X,1_1\n"
                           "1,2016-01-03,2016-01-05,20,mobile,7,Gondal,Y,1_1\n"
                           "2,2016-03-01,2016-03-02,40,desktop,8,Elbonia,Z,2_1\n");
    const auto r = parse_trips(csv);
    REQUIRE(r.trips.size() == 2);
    CHECK(r.trips[0].id == "1_1");
    CHECK(r.trips[0].cities() == std::vector<city_id>{"10", "20", "30"});
    CHECK(r.trips[1].length() == 1);
    CHECK(r.errors.empty());
}

TEST_CASE("duplicate rows are kept") {
    std::istringstream csv(std::string(kHeader) +
                           "1,2016-01-01,2016-01-03,10,mobile,7,Gondal,X,1_1\n"
                           "1,2016-01-01,2016-01-03,10,mobile,7,Gondal,X,1_1\n");
    CHECK(parse_trips(csv).trips.front().length() == 2);
}

TEST_CASE("columns are found by name") {
    std::istringstream csv(
        "utrip_id,city_id,hotel_country,booker_country,affiliate_id,device_class,checkout,checkin,user_id\n"
        "t,5,X,B,1,mobile,2016-01-02,2016-01-01,u\n");
    const auto r = parse_trips(csv);
    CHECK(r.trips.front().reservations.front().city == "5");
    CHECK(format_date(r.trips.front().reservations.front().checkout) == "2016-01-02");
}

TEST_CASE("missing column is fatal") {
    std::istringstream csv("user_id,checkin,checkout,device_class,affiliate_id,booker_country,hotel_country,utrip_id\n");
    CHECK_THROWS_AS(parse_trips(csv), error);
}

TEST_CASE("bad rows throw or are collected") {
    const std::string text = std::string(kHeader) +
                             "1,2016-01-01,2016-01-03,10,mobile,7,Gondal,X,1_1\n"
                             "1,2016-13-01,2016-01-03,11,mobile,7,Gondal,X,1_1\n";
    std::istringstream strict(text);
    CHECK_THROWS_AS(parse_trips(strict), error);
    std::istringstream lenient(text);
    const auto r = parse_trips(lenient, parse_options{false});
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors.front().line == 3);
    CHECK(r.trips.front().length() == 1);
}

TEST_CASE("trips survive a write and re-read") {
    const std::vector<trip> trips{make_trip("a", {"1", "2", "3"}), make_trip("b", {"4"})};
    std::stringstream ss;
    write_trips(ss, trips);
    const auto back = parse_trips(ss).trips;
    REQUIRE(back.size() == 2);
    CHECK(back[0].cities() == trips[0].cities());
    CHECK(back[0].reservations[2].checkout == trips[0].reservations[2].checkout);
}

TEST_CASE("augmentation yields one example per known prefix") {
    const auto ex = augment(make_trip("t", {"A", "B", "C", "D"}));
    REQUIRE(ex.size() == 3);
    CHECK(ex[0].prefix == std::vector<city_id>{"A"});
    CHECK(ex[0].target == "B");
    CHECK(ex[1].prefix == std::vector<city_id>{"A", "B"});
    CHECK(ex[1].target == "C");
    CHECK(ex[2].prefix == std::vector<city_id>{"A", "B", "C"});
    CHECK(ex[2].target == "D");
    CHECK_FALSE(ex[0].is_final);
    CHECK_FALSE(ex[1].is_final);
    CHECK(ex[2].is_final);

    const auto pair = augment(make_trip("p", {"A", "B"}));
    REQUIRE(pair.size() == 1);
    CHECK(pair[0].is_final);
    CHECK(augment(make_trip("s", {"A"})).empty());
}

TEST_CASE("featurize date arithmetic") {
    trip t = make_trip("t", {"A", "B", "C"});
    t.reservations[1].checkin = parse_date("2016-01-05");
    t.reservations[1].checkout = parse_date("2016-01-06");
    t.reservations[2].checkin = parse_date("2016-01-06");
    t.reservations[2].checkout = parse_date("2016-01-09");

    const auto first = featurize(t, 1);
    CHECK(first.numerical[0] == 1.0);  // stay
    CHECK(first.numerical[1] == 4.0);  // days since start
    CHECK(first.numerical[3] == 2.0);  // 01-03 checkout -> 01-05 checkin
    CHECK(first.numerical[4] == 1.0);
    CHECK(first.categorical[2] == "X");
    CHECK(first.categorical[4] == "2");  // 2016-01-05 was a Tuesday
    CHECK(first.categorical[6] == "1");
    CHECK(first.categorical[7] == "2016");

    const auto plain = featurize(make_trip("u", {"A", "B"}), 1);
    CHECK(plain.numerical[0] == 2.0);
    CHECK(plain.numerical[1] == 2.0);  // target checkin minus first checkin
    trip same_day = make_trip("v", {"A", "B"});
    same_day.reservations[1].checkin = same_day.reservations[0].checkin;
    CHECK(featurize(same_day, 1).numerical[1] == 0.0);
    CHECK_THROWS_AS(featurize(t, 0), error);
    CHECK_THROWS_AS(featurize(t, 3), error);
}

TEST_CASE("split holds out final examples") {
    std::vector<trip> trips;
    for (int i = 0; i < 10; ++i) trips.push_back(make_trip("t" + std::to_string(i), {"A", "B", "C", "D"}));
    const auto s = split(trips, 0.2, 3);
    CHECK(s.valid.size() == 2);
    CHECK(s.train.size() == 28);
    CHECK(s.dropped == 0);
    for (const auto& e : s.valid) {
        CHECK(e.is_final);
        CHECK(s.valid_trip_ids.contains(e.trip_id));
    }
    CHECK(split(trips, 0.0, 3).valid.empty());
    CHECK(split(trips, 0.01, 3).valid.empty());

    const auto again = split(trips, 0.2, 3);
    CHECK(again.valid == s.valid);
    CHECK(again.train == s.train);
}

TEST_CASE("held-out trips ending in unseen cities go back to train") {
    const std::vector<trip> trips{make_trip("a", {"A", "B"}), make_trip("b", {"A", "Z"})};
    const auto s = split(trips, 0.5, 0);
    const bool b_sampled = s.dropped == 1;
    CHECK(s.valid.size() + s.dropped == 1);
    if (b_sampled) CHECK(s.train.size() == 2);
}

TEST_CASE("graph sequences hide held-out finals") {
    const std::vector<trip> trips{make_trip("a", {"A", "B", "C"}), make_trip("b", {"D", "E"})};
    const auto seqs = graph_sequences(trips, {"a"});
    CHECK(seqs[0] == std::vector<city_id>{"A", "B"});
    CHECK(seqs[1] == std::vector<city_id>{"D", "E"});
}

TEST_CASE("examples survive a write and re-read") {
    const auto ex = augment(make_trip("t", {"A", "B", "C"}));
    std::stringstream ss;
    write_examples(ss, ex);
    CHECK(read_examples(ss) == ex);
}

TEST_CASE("synthetic returns") {
    synthetic_config all;
    all.trips = 200;
    all.return_probability = 1.0;
    for (const auto& t : generate_synthetic(all)) CHECK(t.reservations.back().city == t.reservations.front().city);

    synthetic_config cfg;
    cfg.trips = 1000;
    int returns = 0;
    for (const auto& t : generate_synthetic(cfg)) returns += t.reservations.back().city == t.reservations.front().city;
    CHECK(std::abs(returns / 1000.0 - 0.15) <= 0.03);
}

TEST_CASE("synthetic countries and determinism") {
    synthetic_config cfg;
    cfg.cities = 10;
    cfg.countries = 2;
    cfg.trips = 300;
    std::set<std::string> countries;
    const auto trips = generate_synthetic(cfg);
    for (const auto& t : trips) {
        CHECK(t.length() >= cfg.min_length);
        for (const auto& r : t.reservations) {
            countries.insert(r.hotel_country);
            const auto stay = (r.checkout - r.checkin).count();
            CHECK(stay >= 1);
            CHECK(stay <= 7);
        }
    }
    CHECK(countries.size() == 2);

    std::stringstream a, b;
    write_trips(a, trips);
    write_trips(b, generate_synthetic(cfg));
    CHECK(a.str() == b.str());
}

TEST_CASE("augmentation counts over random lengths") {
    for (std::size_t len = 1; len <= 20; ++len) {
        std::vector<std::string> cities;
        for (std::size_t i = 0; i < len; ++i) cities.push_back(std::to_string(i));
        const auto ex = augment(make_trip("t", cities));
        CHECK(ex.size() == len - 1);
        const auto finals = std::count_if(ex.begin(), ex.end(), [](const trip_example& e) { return e.is_final; });
        CHECK(finals == (len >= 2 ? 1 : 0));
    }
}
