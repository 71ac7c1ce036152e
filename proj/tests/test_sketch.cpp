#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "emde/common.hpp"
#include "emde/encoder.hpp"
#include "emde/scoring.hpp"
#include "emde/sketch.hpp"

using namespace emde;

namespace {

sketch make(sketch_shape shape, std::vector<double> cells) { return sketch({shape}, std::move(cells)); }

codes_matrix fixed_codes(sketch_shape shape, const std::vector<std::vector<std::uint16_t>>& rows) {
    codes_matrix c(rows.size(), shape, modality_kind::random, 0, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), c.row(i).begin());
    return c;
}

sketch random_sketch(const std::vector<sketch_shape>& shapes, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    sketch s(shapes);
    for (auto& x : s.cells()) x = u(rng);
    return s;
}

}  // namespace

TEST_CASE("aggregate with decay one is a plain sum") {
    const sketch_shape shape{1, 4};
    const std::vector<sketch> h{make(shape, {1, 0, 0, 0}), make(shape, {0, 0, 1, 0})};
    CHECK(aggregate(h, 1.0) == make(shape, {1, 0, 1, 0}));

    std::mt19937_64 rng(1);
    const std::vector<sketch_shape> shapes{{3, 8}, {2, 4}};
    std::vector<sketch> many;
    for (int i = 0; i < 6; ++i) many.push_back(random_sketch(shapes, rng));
    const auto sum = aggregate(many, 1.0);
    for (std::size_t c = 0; c < sum.size(); ++c) {
        double expect = 0.0;
        for (const auto& s : many) expect += s[c];
        CHECK(std::abs(sum[c] - expect) <= 1e-9);
    }
}

TEST_CASE("aggregate weights older sketches by decay") {
    const sketch_shape shape{1, 2};
    const auto old_s = make(shape, {1.0, 0.0});
    const auto new_s = make(shape, {0.0, 1.0});
    const std::vector<sketch> h{old_s, new_s};
    const auto a = aggregate(h, 0.5);
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 1.0);

    const std::vector<sketch> single{make(shape, {0.3, 0.7})};
    CHECK(aggregate(single, 0.2) == single.front());

    const auto empty = aggregate(std::span<const sketch>{}, 0.9, {shape});
    CHECK(empty == sketch(shape));
    CHECK_THROWS_AS(aggregate(h, 0.0), error);
    CHECK_THROWS_AS(aggregate(h, 1.5), error);
}

TEST_CASE("smaller decay forgets the past faster") {
    const sketch_shape shape{1, 2};
    const std::vector<sketch> h{make(shape, {1, 0}), make(shape, {0, 1}), make(shape, {0, 1})};
    double prev = 0.0;
    for (double d : {0.1, 0.3, 0.6, 0.9, 1.0}) {
        const double share = aggregate(h, d)[0];
        CHECK(share > prev);
        prev = share;
    }
}

TEST_CASE("width-wise normalization") {
    const auto n = normalize_widthwise(make({2, 2}, {3, 4, 0, 0}));
    CHECK(n[0] == doctest::Approx(0.6));
    CHECK(n[1] == doctest::Approx(0.8));
    CHECK(n[2] == 0.0);
    CHECK(n[3] == 0.0);

    std::mt19937_64 rng(2);
    const std::vector<sketch_shape> shapes{{4, 16}, {3, 8}};
    const auto s = normalize_widthwise(random_sketch(shapes, rng));
    std::size_t offset = 0;
    for (const auto& shape : shapes)
        for (std::uint32_t d = 0; d < shape.depth; ++d, offset += shape.width) {
            double sq = 0.0;
            for (std::uint32_t w = 0; w < shape.width; ++w) sq += s[offset + w] * s[offset + w];
            CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
        }
}

TEST_CASE("concat") {
    const auto a = make({1, 2}, {1, 0});
    const auto b = make({1, 2}, {0, 1});
    const std::vector<sketch> ab{a, b}, ba{b, a}, only{a};
    CHECK(concat(ab).size() == 4);
    CHECK(concat(ab).shapes().size() == 2);
    CHECK(concat(only) == a);
    CHECK(concat(ab) != concat(ba));
}

TEST_CASE("geometric mean hand cases") {
    const auto two = fixed_codes({2, 2}, {{0, 1}});
    const std::vector<codes_matrix> m2{two};
    CHECK(std::abs(score_items(make({2, 2}, {0.2, 0.0, 0.0, 0.8}), m2)[0] - 0.4) <= 1e-12);

    const auto three = fixed_codes({3, 2}, {{0, 0, 1}});
    const std::vector<codes_matrix> m3{three};
    CHECK(std::abs(score_items(make({3, 2}, {1.0, 0.0, 0.5, 0.0, 0.0, 0.25}), m3)[0] - 0.5) <= 1e-12);
}

TEST_CASE("constant field scores every city alike") {
    const std::vector<codes_matrix> mods{build_random_codes(50, 8, 4, 1), build_random_codes(50, 4, 3, 2)};
    sketch s({sketch_shape{4, 8}, sketch_shape{3, 4}});
    for (auto& x : s.cells()) x = 0.37;
    for (double v : score_items(s, mods)) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("cells below the floor are clamped") {
    const std::vector<codes_matrix> m{fixed_codes({1, 2}, {{0}, {1}})};
    const auto scores = score_items(make({1, 2}, {-1.0, 0.0}), m);
    CHECK(scores[0] == doctest::Approx(kScoreFloor));
    CHECK(scores[1] == doctest::Approx(kScoreFloor));
}

TEST_CASE("a city's own sketch ranks it weakly first") {
    const std::vector<codes_matrix> mods{build_random_codes(300, 16, 8, 1), build_random_codes(300, 16, 8, 2)};
    for (std::size_t c = 0; c < 300; c += 7) {
        const auto scores = score_items(item_sketch(mods, c), mods);
        CHECK(*std::max_element(scores.begin(), scores.end()) == scores[c]);
    }
}

TEST_CASE("scaling the output does not change the ranking") {
    std::mt19937_64 rng(4);
    const std::vector<codes_matrix> mods{build_random_codes(100, 8, 6, 3)};
    const auto s = random_sketch({sketch_shape{6, 8}}, rng);
    auto scaled = s;
    scaled *= 3.0;
    const auto a = score_items(s, mods), b = score_items(scaled, mods);
    for (std::size_t c = 0; c < a.size(); ++c) CHECK(b[c] == doctest::Approx(3.0 * a[c]).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
    sketch a(sketch_shape{1, 2});
    const sketch b(sketch_shape{1, 3});
    CHECK_THROWS_AS(a += b, error);
    const std::vector<codes_matrix> m{build_random_codes(5, 4, 2, 0)};
    CHECK_THROWS_AS(score_items(b, m), error);
}

TEST_CASE("sketch save and load") {
    std::mt19937_64 rng(8);
    const auto s = random_sketch({sketch_shape{2, 4}, sketch_shape{1, 8}}, rng);
    const auto path = std::filesystem::temp_directory_path() / "emde_test_sketch.bin";
    save_sketch(s, path);
    const auto back = load_sketch(path);  // cells are stored as 32-bit floats
    CHECK(back.shapes() == s.shapes());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(s[i])));
    std::filesystem::remove(path);
}
