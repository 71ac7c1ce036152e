#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "emde/common.hpp"
#include "emde/config.hpp"
#include "emde/pipeline.hpp"

using namespace emde;
namespace fs = std::filesystem;

namespace {

pipeline_config small_config(const std::string& dir) {
    pipeline_config c;
    c.work_dir = fs::temp_directory_path() / dir;
    c.synthetic.cities = 120;
    c.synthetic.countries = 4;
    c.synthetic.trips = 400;
    c.dim = 16;
    c.training.hidden = 16;
    c.training.batch = 32;
    c.training.epochs = 1;
    c.ensemble = 2;
    return c;
}

bool contains(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

}  // namespace

TEST_CASE("profiles") {
    const auto desk = default_config(profile::desk);
    CHECK(desk.dim == 64);
    CHECK(desk.width == 16);
    CHECK(desk.depth == 8);
    CHECK(desk.training.hidden == 256);
    CHECK(desk.iterations == std::vector<unsigned>{1, 3});
    CHECK(desk.ensemble == 5);

    const auto paper = default_config(profile::paper);
    CHECK(paper.dim == 1024);
    CHECK(paper.width == 128);
    CHECK(paper.depth == 40);
    CHECK(paper.training.hidden == 3000);
    CHECK(paper.training.optimizer.learning_rate == 5e-4);
}

TEST_CASE("settings") {
    auto c = default_config(profile::desk);
    apply_setting(c, "finetune-epochs", "3");
    apply_setting(c, "iterations", "1,2,4");
    apply_setting(c, "random_modality", "false");
    CHECK(c.training.finetune_epochs == 3);
    CHECK(c.iterations == std::vector<unsigned>{1, 2, 4});
    CHECK_FALSE(c.random_modality);
    CHECK_THROWS_AS(apply_setting(c, "no_such_key", "1"), error);
    CHECK_THROWS_AS(apply_setting(c, "hidden", "many"), error);

    const auto kv = parse_config_text("# comment\n[model]\nhidden = 32\nlr = \"0.001\"\n\nprofile=paper\n");
    CHECK(kv.at("hidden") == "32");
    CHECK(kv.at("lr") == "0.001");
    auto d = default_config(profile::desk);
    apply_settings(d, kv);
    CHECK(d.scale == profile::paper);
    CHECK(d.dim == 1024);
    CHECK(d.training.hidden == 32);
}

TEST_CASE("describe round trips through the config parser") {
    auto c = small_config("emde_describe");
    c.training.optimizer.learning_rate = 0.00123;
    pipeline_config back;
    apply_settings(back, parse_config_text(describe(c)));
    CHECK(describe(back) == describe(c));
    for (const auto& key : config_keys()) CHECK(describe(c).find(key + " = ") != std::string::npos);
}

TEST_CASE("fingerprints are stable and chained") {
    const auto a = small_config("emde_fp");
    const auto fa = compute_fingerprints(a);
    CHECK(compute_fingerprints(a).models == fa.models);

    auto b = a;
    b.training.hidden = 32;
    const auto fb = compute_fingerprints(b);
    CHECK(fb.sketches == fa.sketches);
    CHECK(fb.models != fa.models);
    CHECK(fb.evaluate != fa.evaluate);

    auto s = a;
    s.seed = 1;
    CHECK(compute_fingerprints(s).data != fa.data);
    CHECK(stage_seed(a, "model") != stage_seed(a, "embed"));
    CHECK(stage_seed(a, "model") == stage_seed(small_config("other"), "model"));
}

TEST_CASE("pipeline runs, skips and recovers") {
    const auto c = small_config("emde_pipeline_test");
    fs::remove_all(c.work_dir);
    const auto first = run_pipeline(c);
    CHECK(first.skipped.empty());
    CHECK(first.ran.size() == 7);
    CHECK(first.report.precision_at_k >= 0.0);
    CHECK(first.report.precision_at_k <= 1.0);
    const artifact_paths paths{c.work_dir};
    CHECK(fs::exists(paths.report_dir() / "report.json"));
    CHECK(fs::exists(paths.report_dir() / "predictions.csv"));
    CHECK(peek_fingerprint(paths.graph()) == compute_fingerprints(c).graph);

    const auto second = run_pipeline(c);
    CHECK(second.ran.empty());
    CHECK(second.skipped.size() == 7);
    CHECK(second.report.precision_at_k == first.report.precision_at_k);

    {
        std::fstream f(paths.graph(), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_FALSE(peek_fingerprint(paths.graph()).has_value());
    const auto third = run_pipeline(c);
    CHECK(contains(third.ran, "graph"));
    CHECK(contains(third.skipped, "train.0"));

    auto more = c;
    more.training.hidden = 8;
    const auto fourth = run_pipeline(more);
    CHECK(contains(fourth.skipped, "sketches"));
    CHECK(contains(fourth.ran, "train.1"));
    CHECK(contains(fourth.ran, "evaluate"));
    fs::remove_all(c.work_dir);
}

TEST_CASE("a failing stage leaves a marker") {
    auto c = small_config("emde_pipeline_fail");
    fs::remove_all(c.work_dir);
    c.trips = c.work_dir / "missing.csv";
    CHECK_THROWS(run_pipeline(c));
    CHECK(fs::exists(artifact_paths{c.work_dir}.failed_marker("data")));
    fs::remove_all(c.work_dir);
}
