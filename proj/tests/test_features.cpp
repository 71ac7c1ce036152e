#include <doctest.h>

#include <cmath>

#include "emde/common.hpp"
#include "emde/features.hpp"

using namespace emde;

namespace {

trip_example example(std::vector<city_id> prefix, double stay, std::string booker) {
    trip_example e;
    e.trip_id = "t";
    e.prefix = std::move(prefix);
    e.target = "A";
    e.numerical.fill(1.0);
    e.numerical[0] = stay;
    e.categorical = {"mobile", std::move(booker), "X", "7", "1", "2", "3", "2016"};
    return e;
}

struct world {
    city_index cities{{"A", "B", "C"}};
    std::vector<codes_matrix> codes{build_random_codes(3, 4, 2, 1), build_random_codes(3, 8, 3, 2)};
    feature_encoder features = feature_encoder::fit(std::vector<trip_example>{example({"A"}, 2, "P")});
};

double row_norm(const sketch& s, std::size_t offset, std::size_t width) {
    double sq = 0.0;
    for (std::size_t i = 0; i < width; ++i) sq += s[offset + i] * s[offset + i];
    return std::sqrt(sq);
}

}  // namespace

TEST_CASE("single-city prefix") {
    world w;
    const auto in = assemble_input(example({"B"}, 1, "P"), w.cities, w.codes, w.features, 0.9);
    const auto b = item_sketch(w.codes, 1);
    CHECK(in.first_city == b);
    CHECK(in.prev_city == b);
    CHECK(in.all_cities == b);
}

TEST_CASE("all-cities sketch rows are unit length") {
    world w;
    const auto in = assemble_input(example({"A", "B"}, 1, "P"), w.cities, w.codes, w.features, 0.9);
    std::size_t offset = 0;
    for (const auto& shape : in.all_cities.shapes())
        for (std::uint32_t d = 0; d < shape.depth; ++d, offset += shape.width)
            CHECK(row_norm(in.all_cities, offset, shape.width) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("revisited city is both first and previous") {
    world w;
    const auto in = assemble_input(example({"A", "B", "A"}, 1, "P"), w.cities, w.codes, w.features, 0.9);
    CHECK(in.first_city == item_sketch(w.codes, 0));
    CHECK(in.prev_city == item_sketch(w.codes, 0));
}

TEST_CASE("unknown prefix city is an error") {
    world w;
    CHECK_THROWS_AS(assemble_input(example({"Q"}, 1, "P"), w.cities, w.codes, w.features, 0.9), error);
    CHECK_THROWS_AS(assemble_input(example({}, 1, "P"), w.cities, w.codes, w.features, 0.9), error);
}

TEST_CASE("standardization and vocabularies") {
    const std::vector<trip_example> train{example({"A"}, 1, "P"), example({"A"}, 3, "Q")};
    const auto enc = feature_encoder::fit(train);
    const auto z = enc.standardize(train[1].numerical);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(0.0));  // constant column keeps unit scale

    const auto codes = enc.encode(example({"A"}, 1, "Q").categorical);
    CHECK(codes[1] == 2);
    CHECK(enc.encode(example({"A"}, 1, "unseen").categorical)[1] == 0);
    CHECK(enc.vocab_size(1) == 3);
    CHECK(enc.vocab_size(4) == 8);  // weekdays plus the unknown slot
    CHECK(enc.vocab_size(6) == 13);

    CHECK(feature_encoder::from_json(enc.to_json()) == enc);
}

TEST_CASE("dense layout") {
    world w;
    const input_options all{};
    const input_options bare{false, false};
    CHECK(dense_input_width(w.codes, all) == 3 * (8 + 24) + 8 + 1);
    CHECK(dense_input_width(w.codes, bare) == 3 * (8 + 24));

    auto in = assemble_input(example({"A", "C"}, 5, "P"), w.cities, w.codes, w.features, 0.9);
    in.is_final = 1.0;
    std::vector<double> row(dense_input_width(w.codes, all));
    write_dense_input(in, all, row);
    CHECK(row.back() == 1.0);
    CHECK(row[8 + 24 + 8 + 24 + 8 + 24] == doctest::Approx(in.numerical[0]));
    std::vector<float> short_row(3);
    CHECK_THROWS_AS(write_dense_input(in, all, short_row), error);

    const auto dims = embedding_dims(all);
    CHECK(dims == std::vector<std::size_t>{20, 20, 120, 120, 20, 20, 20, 20});
    CHECK(embedding_dims(bare).empty());
}
