#include "emde/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"
#include "emde/encoder.hpp"
#include "emde/logging.hpp"

namespace emde {

namespace fs = std::filesystem;

namespace {

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    fingerprint_builder fb;
    std::string buf(1 << 16, '\0');
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        fb.add(std::string_view(buf.data(), static_cast<std::size_t>(is.gcount())));
    }
    return fb.value();
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::optional<std::uint64_t> read_stamp(const fs::path& path) {
    std::ifstream is(path);
    std::string text;
    if (!(is >> text) || text.size() != 16) return std::nullopt;
    std::uint64_t v = 0;
    std::istringstream(text) >> std::hex >> v;
    return v;
}

void write_stamp(const fs::path& path, std::uint64_t fp) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path);
    os << hex(fp) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    os << text;
}

std::vector<trip> load_trips(const pipeline_config& config, const artifact_paths& paths) {
    const fs::path source = config.trips.empty() ? paths.trips() : config.trips;
    return parse_trips_file(source).trips;
}

std::set<std::string> trip_ids(const std::vector<trip_example>& examples) {
    std::set<std::string> ids;
    for (const auto& e : examples) ids.insert(e.trip_id);
    return ids;
}

synthetic_config synthetic_for(const pipeline_config& config) {
    synthetic_config s = config.synthetic;
    s.seed = stage_seed(config, "data");
    return s;
}

void write_predictions(const fs::path& path, std::span<const trip_example> examples,
                                           std::span<const eval_sample> samples, const city_index& cities) {
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path.string());
    os << "utrip_id";
    const std::size_t k = samples.empty() ? 4 : samples.front().ranked.size();
    for (std::size_t i = 1; i <= k; ++i) os << ",city_" << i;
    os << '\n';
    for (std::size_t i = 0; i < examples.size(); ++i) {
        os << examples[i].trip_id;
        for (auto c : samples[i].ranked) os << ',' << cities.id(c);
        os << '\n';
    }
}

}  // namespace

stage_fingerprints compute_fingerprints(const pipeline_config& c) {
    stage_fingerprints fp;
    {
        fingerprint_builder fb;
        fb.add("data").add(c.seed).add(c.valid_fraction);
        if (c.trips.empty()) {
            fb.add("synthetic")
                .add(c.synthetic.cities)
                .add(c.synthetic.countries)
                .add(c.synthetic.trips)
                .add(c.synthetic.mean_length)
                .add(c.synthetic.min_length)
                .add(c.synthetic.return_probability);
        } else {
            fb.add("csv").add(fs::exists(c.trips) ? hash_file(c.trips) : 0);
        }
        fp.data = fb.value();
    }
    fp.graph = fingerprint_builder{}.add("graph").add(fp.data).value();
    {
        fingerprint_builder fb;
        fb.add("embed").add(fp.graph).add(c.dim).add(c.directed_only);
        for (auto i : c.iterations) fb.add(i);
        fp.embed = fb.value();
    }
    fp.sketches =
        fingerprint_builder{}.add("sketches").add(fp.embed).add(c.width).add(c.depth).add(c.random_modality).value();
    for (std::size_t m = 0; m < c.ensemble; ++m) {
        const auto o = model_options(c, m);
        fingerprint_builder fb;
        fb.add("model")
            .add(fp.sketches)
            .add(o.hidden)
            .add(o.blocks)
            .add(o.leaky_slope)
            .add(o.bn_momentum)
            .add(o.optimizer.learning_rate)
            .add(o.optimizer.beta1)
            .add(o.optimizer.beta2)
            .add(o.optimizer.epsilon)
            .add(o.optimizer.weight_decay)
            .add(o.batch)
            .add(o.epochs)
            .add(o.finetune_epochs)
            .add(o.finetune_lr_factor)
            .add(o.seed)
            .add(o.input.use_flag)
            .add(o.input.use_features)
            .add(o.input.decay)
            .add(o.input.wide_embedding)
            .add(o.input.narrow_embedding);
        fp.models.push_back(fb.value());
    }
    {
        fingerprint_builder fb;
        fb.add("evaluate").add(c.popularity_boost).add(c.top_k);
        for (auto m : fp.models) fb.add(m);
        fp.evaluate = fb.value();
    }
    return fp;
}

std::optional<std::uint64_t> peek_fingerprint(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    char magic[4];
    is.read(magic, 4);
    if (!is) return std::nullopt;
    const std::string_view m(magic, 4);
    if (m != "TGRF" && m != "CEMB" && m != "CODE" && m != "SKCH" && m != "EMDM") return std::nullopt;
    std::uint32_t version = 0;
    std::uint64_t fp = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof version);
    is.read(reinterpret_cast<char*>(&fp), sizeof fp);
    if (!is || version != 1) return std::nullopt;
    return fp;
}

std::vector<codes_matrix> build_modalities(const pipeline_config& config, std::span<const embedding_table> tables) {
    std::vector<codes_matrix> codes;
    for (std::size_t m = 0; m < tables.size(); ++m)
        codes.push_back(build_codes(tables[m], config.width, config.depth,
                                    stage_seed(config, "sketch." + std::to_string(m))));
    if (config.random_modality) {
        if (tables.empty()) throw error("random modality needs at least one embedding table for the city count");
        codes.push_back(build_random_codes(tables.front().rows(), config.width, config.depth,
                                           stage_seed(config, "random-codes")));
    }
    return codes;
}

training_options model_options(const pipeline_config& config, std::size_t member) {
    training_options o = config.training;
    o.seed = stage_seed(config, "model") + member;
    return o;
}

prepared_data prepare_data(const pipeline_config& config) {
    std::vector<trip> trips =
        config.trips.empty() ? generate_synthetic(synthetic_for(config)) : parse_trips_file(config.trips).trips;
    split_result parts = split(trips, config.valid_fraction, stage_seed(config, "split"));
    const transition_graph graph = build_graph(graph_sequences(trips, parts.valid_trip_ids));
    const auto tables = embed_cities(graph, config.dim, config.iterations, stage_seed(config, "embed"),
                                     {config.directed_only});
    prepared_data data;
    data.train = std::move(parts.train);
    data.valid = std::move(parts.valid);
    data.cities = city_index(graph.node_ids());
    data.codes = build_modalities(config, tables);
    return data;
}

pipeline_result run_pipeline(const pipeline_config& config) {
    const artifact_paths paths{config.work_dir};
    fs::create_directories(paths.root);
    const stage_fingerprints fp = compute_fingerprints(config);
    pipeline_result result;

    auto binaries_match = [](const std::vector<fs::path>& files, std::uint64_t expected) {
        for (const auto& f : files)
            if (peek_fingerprint(f) != expected) return false;
        return true;
    };
    auto run_stage = [&](const std::string& name, std::uint64_t stage_fp, const std::vector<fs::path>& outputs,
                         bool binary, auto&& body) {
        bool fresh = read_stamp(paths.stamp(name)) == stage_fp;
        for (const auto& f : outputs) fresh = fresh && fs::exists(f);
        if (fresh && binary) fresh = binaries_match(outputs, stage_fp);
        if (fresh) {
            result.skipped.push_back(name);
            log_info("[" + name + "] up to date");
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        fs::remove(paths.stamp(name));
        try {
            body();
        } catch (const std::exception& e) {
            write_text(paths.failed_marker(name), std::string(e.what()) + "\n");
            throw;
        }
        fs::remove(paths.failed_marker(name));
        write_stamp(paths.stamp(name), stage_fp);
        result.ran.push_back(name);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream msg;
        msg << "[" << name << "] done in " << std::fixed << std::setprecision(1) << secs << " s";
        log_info(msg.str());
    };

    // data: trips (generated or ingested) and the train/validation example split
    std::vector<fs::path> data_outputs{paths.train_examples(), paths.valid_examples()};
    if (config.trips.empty()) data_outputs.push_back(paths.trips());
    run_stage("data", fp.data, data_outputs, false, [&] {
        std::vector<trip> trips;
        if (config.trips.empty()) {
            trips = generate_synthetic(synthetic_for(config));
            write_trips_file(paths.trips(), trips);
        } else {
            trips = parse_trips_file(config.trips).trips;
        }
        const auto parts = split(trips, config.valid_fraction, stage_seed(config, "split"));
        write_examples_file(paths.train_examples(), parts.train);
        write_examples_file(paths.valid_examples(), parts.valid);
    });

    run_stage("graph", fp.graph, {paths.graph()}, true, [&] {
        const auto trips = load_trips(config, paths);
        const auto holdout = trip_ids(read_examples_file(paths.valid_examples()));
        save_graph(build_graph(graph_sequences(trips, holdout)), paths.graph(), fp.graph);
    });

    std::vector<fs::path> embedding_files;
    for (auto i : config.iterations) embedding_files.push_back(paths.embedding(i));
    run_stage("embed", fp.embed, embedding_files, true, [&] {
        const auto graph = load_graph(paths.graph());
        const auto tables =
            embed_cities(graph, config.dim, config.iterations, stage_seed(config, "embed"), {config.directed_only});
        for (std::size_t t = 0; t < tables.size(); ++t) save_embeddings(tables[t], embedding_files[t], fp.embed);
    });

    const std::size_t modalities = config.iterations.size() + (config.random_modality ? 1 : 0);
    std::vector<fs::path> code_files;
    for (std::size_t m = 0; m < modalities; ++m) code_files.push_back(paths.codes(m));
    run_stage("sketches", fp.sketches, code_files, true, [&] {
        std::vector<embedding_table> tables;
        for (const auto& f : embedding_files) tables.push_back(load_embeddings(f));
        const auto codes = build_modalities(config, tables);
        for (std::size_t m = 0; m < codes.size(); ++m) save_codes(codes[m], code_files[m], fp.sketches);
    });

    auto load_inputs = [&] {
        const auto graph = load_graph(paths.graph());
        std::vector<codes_matrix> codes;
        for (const auto& f : code_files) codes.push_back(load_codes(f));
        return std::pair{city_index(graph.node_ids()), std::move(codes)};
    };

    for (std::size_t m = 0; m < config.ensemble; ++m) {
        run_stage("train." + std::to_string(m), fp.models[m], {paths.model(m)}, true, [&] {
            auto [cities, codes] = load_inputs();
            const auto train = read_examples_file(paths.train_examples());
            predictor model = train_two_stage(train, cities, std::move(codes), model_options(config, m));
            model.fingerprint = fp.models[m];
            save_predictor(model, paths.model(m));
        });
    }

    const fs::path report_json = paths.report_dir() / "report.json";
    run_stage("evaluate", fp.evaluate,
              {report_json, paths.report_dir() / "hits.csv", paths.report_dir() / "predictions.csv"}, false, [&] {
                  fs::create_directories(paths.report_dir());
                  std::vector<predictor> models;
                  for (std::size_t m = 0; m < config.ensemble; ++m) models.push_back(load_predictor(paths.model(m)));
                  std::vector<const predictor*> ptrs;
                  for (const auto& p : models) ptrs.push_back(&p);
                  const auto valid = read_examples_file(paths.valid_examples());
                  const auto samples = rank_examples(ptrs, valid, {config.popularity_boost, config.top_k});
                  const auto report = precision_at_k(samples, config.top_k);
                  const auto baseline =
                      evaluate_popularity_baseline({models.front().final_counts}, models.front().cities, valid,
                                                   config.top_k);
                  nlohmann::json j;
                  j["fingerprint"] = hex(fp.evaluate);
                  j["config"] = describe(config);
                  j["evaluation"] = report.to_json();
                  j["popularity_baseline_precision"] = baseline.precision_at_k;
                  write_text(report_json, j.dump(2) + "\n");
                  write_hits_csv(paths.report_dir() / "hits.csv", valid, report);
                  write_predictions(paths.report_dir() / "predictions.csv", valid, samples, models.front().cities);
              });

    const auto j = nlohmann::json::parse(std::ifstream(report_json));
    const auto& ev = j.at("evaluation");
    result.report.k = ev.at("k");
    result.report.precision_at_k = ev.at("precision_at_k");
    result.report.return_trips.samples = ev.at("return_trips").at("samples");
    result.report.return_trips.hits = ev.at("return_trips").at("hits");
    for (const auto& b : ev.at("by_trip_length"))
        result.report.by_trip_length[b.at("trip_length")] = {b.at("samples"), b.at("hits")};
    result.popularity_baseline = j.at("popularity_baseline_precision");
    return result;
}

std::vector<std::string> ablation_study::column_names() const {
    std::vector<std::string> names;
    if (!tables.empty())
        for (const auto& c : tables.front().columns) names.push_back(c.name);
    return names;
}

std::vector<double> ablation_study::column_mean() const {
    std::vector<double> mean(column_names().size(), 0.0);
    for (const auto& t : tables)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += t.columns[i].precision;
    for (double& m : mean) m /= static_cast<double>(tables.size());
    return mean;
}

std::vector<double> ablation_study::column_stddev() const {
    const auto mean = column_mean();
    std::vector<double> sd(mean.size(), 0.0);
    if (tables.size() < 2) return sd;
    for (const auto& t : tables)
        for (std::size_t i = 0; i < sd.size(); ++i) sd[i] += std::pow(t.columns[i].precision - mean[i], 2);
    for (double& s : sd) s = std::sqrt(s / static_cast<double>(tables.size() - 1));
    return sd;
}

nlohmann::json ablation_study::to_json() const {
    nlohmann::json j;
    j["seeds"] = seeds;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& t : tables) runs.push_back(t.to_json());
    j["runs"] = runs;
    const auto names = column_names();
    const auto mean = column_mean();
    const auto sd = column_stddev();
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        nlohmann::json c = {{"name", names[i]}, {"mean_precision_at_4", mean[i]}, {"stddev", sd[i]}};
        c["difference"] = i == 0 ? nlohmann::json(nullptr) : nlohmann::json(mean[i] - mean[i - 1]);
        summary.push_back(c);
    }
    j["summary"] = summary;
    return j;
}

ablation_study run_ablation_study(const pipeline_config& config, std::span<const std::uint64_t> seeds) {
    ablation_study study;
    for (auto seed : seeds) {
        pipeline_config c = config;
        c.seed = seed;
        const prepared_data data = prepare_data(c);
        ablation_options options;
        options.base = model_options(c, 0);
        options.ensemble_size = c.ensemble;
        study.seeds.push_back(seed);
        study.tables.push_back(ablation_run(data, options));
    }
    return study;
}

}  // namespace emde
