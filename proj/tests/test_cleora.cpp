#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "emde/common.hpp"
#include "emde/cleora.hpp"

using namespace emde;

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void check_unit_rows(const embedding_table& t) {
    for (std::size_t r = 0; r < t.rows(); ++r) CHECK(norm(t.row(r)) == doctest::Approx(1.0).epsilon(1e-6));
}

embedding_table two_node_table() {
    embedding_table t(2, 2);
    t.row(0)[0] = 1.0;
    t.row(1)[1] = 1.0;
    return t;
}

transition_graph random_graph(std::uint64_t seed, int nodes, int trips) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> city(0, nodes - 1), len(2, 6);
    std::vector<std::vector<city_id>> seqs(trips);
    for (auto& t : seqs) {
        const int n = len(rng);
        for (int i = 0; i < n; ++i) t.push_back(std::to_string(city(rng)));
    }
    return build_graph(seqs);
}

}  // namespace

TEST_CASE("init rows are unit vectors over a two-value alphabet") {
    const auto t = init_embeddings(3, 4, 7);
    CHECK(t.rows() == 3);
    CHECK(t.dim() == 4);
    check_unit_rows(t);
    CHECK(init_embeddings(3, 4, 7) == t);

    const auto one = init_embeddings(1, 2, 0);
    for (double x : one.row(0)) CHECK(std::abs(x) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("init rejects degenerate sizes") {
    CHECK_THROWS_AS(init_embeddings(0, 4, 0), error);
    CHECK_THROWS_AS(init_embeddings(3, 1, 0), error);
}

TEST_CASE("two-cycle swaps the embeddings") {
    const auto g = build_graph({{"A", "B", "A"}});
    const auto t = iterate(two_node_table(), g, 1);
    CHECK(t.row(0)[0] == 0.0);
    CHECK(t.row(0)[1] == 1.0);
    CHECK(t.row(1)[0] == 1.0);
    CHECK(t.row(1)[1] == 0.0);
    CHECK(t.iteration() == 1);

    // two swaps restore the start
    CHECK(iterate(two_node_table(), g, 2).data() == two_node_table().data());
    const auto init = init_embeddings(2, 5, 3);
    const auto back = iterate(init, g, 2);
    for (std::size_t i = 0; i < init.data().size(); ++i) CHECK(back.data()[i] == doctest::Approx(init.data()[i]).epsilon(1e-12));
}

TEST_CASE("self loop is a fixed point") {
    const auto g = build_graph({{"A", "A"}});
    embedding_table t(1, 3);
    t.row(0)[0] = 0.6;
    t.row(0)[2] = 0.8;
    const auto out = iterate(t, g, 1);
    CHECK(out.row(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(out.row(0)[1] == 0.0);
    CHECK(out.row(0)[2] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("isolated nodes keep their vector") {
    const auto g = build_graph({{"A", "B"}, {"C"}});
    const auto init = init_embeddings(3, 8, 1);
    const auto out = iterate(init, g, 3);
    const auto c = g.index_of("C");
    CHECK(std::equal(out.row(c).begin(), out.row(c).end(), init.row(c).begin()));
}

TEST_CASE("rows stay unit length after every step") {
    const auto g = random_graph(5, 40, 100);
    auto t = init_embeddings(g.node_count(), 16, 3);
    for (int step = 0; step < 5; ++step) {
        t = iterate(t, g, 1);
        check_unit_rows(t);
    }
}

TEST_CASE("disconnected components evolve independently") {
    // "a*" ids sort before "b*", so component A keeps the same row indices in both graphs.
    const std::vector<std::vector<city_id>> a = {{"a0", "a1", "a2"}, {"a2", "a3", "a0"}, {"a1", "a3"}};
    auto both = a;
    both.push_back({"b0", "b1", "b2", "b0"});
    const auto ga = build_graph(a);
    const auto gb = build_graph(both);
    const auto ta = embed_cities(ga, 8, {3}, 11).front();
    const auto tb = embed_cities(gb, 8, {3}, 11).front();
    for (std::size_t r = 0; r < ga.node_count(); ++r) {
        CHECK(gb.index_of(ga.node_ids()[r]) == r);
        CHECK(std::equal(ta.row(r).begin(), ta.row(r).end(), tb.row(r).begin()));
    }
}

TEST_CASE("embed_cities matches direct iteration") {
    const auto g = random_graph(9, 30, 60);
    const auto tables = embed_cities(g, 12, {1, 3}, 4);
    REQUIRE(tables.size() == 2);
    const auto init = init_embeddings(g.node_count(), 12, 4);
    CHECK(tables[0].data() == iterate(init, g, 1).data());
    CHECK(tables[1].data() == iterate(init, g, 3).data());
    CHECK(tables[0].iteration() == 1);
    CHECK(tables[1].iteration() == 3);

}

TEST_CASE("directed mode averages out-neighbors only") {
    const auto g = build_graph({{"A", "B", "C"}});
    embedding_table t(3, 3);
    for (std::size_t r = 0; r < 3; ++r) t.row(r)[r] = 1.0;
    const auto out = iterate(t, g, 1, cleora_options{true});
    CHECK(out.row(0)[1] == 1.0);  // A -> B
    CHECK(out.row(1)[2] == 1.0);  // B -> C
    CHECK(out.row(2)[2] == 1.0);  // C has no successor
}

TEST_CASE("save and load keeps unit rows") {
    const auto g = random_graph(2, 20, 40);
    const auto t = embed_cities(g, 8, {1}, 5).front();
    const auto path = std::filesystem::temp_directory_path() / "emde_test_embedding.bin";
    save_embeddings(t, path, 77);
    std::uint64_t fp = 0;
    const auto back = load_embeddings(path, &fp);
    CHECK(fp == 77);
    CHECK(back.rows() == t.rows());
    CHECK(back.iteration() == 1);
    check_unit_rows(back);
    for (std::size_t i = 0; i < t.data().size(); ++i) CHECK(back.data()[i] == doctest::Approx(t.data()[i]).epsilon(1e-6));
    std::filesystem::remove(path);
}
