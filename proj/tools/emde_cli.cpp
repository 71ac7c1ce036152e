// Command-line driver for the trip destination pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emde/cleora.hpp"
#include "emde/config.hpp"
#include "emde/dataset.hpp"
#include "emde/encoder.hpp"
#include "emde/evaluator.hpp"
#include "emde/graph.hpp"
#include "emde/logging.hpp"
#include "emde/pipeline.hpp"
#include "emde/training.hpp"

namespace fs = std::filesystem;
using namespace emde;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<codes_matrix> load_code_prefix(const std::string& prefix) {
    std::vector<codes_matrix> codes;
    for (std::size_t m = 0;; ++m) {
        const fs::path file = prefix + "." + std::to_string(m) + ".bin";
        if (!fs::exists(file)) break;
        codes.push_back(load_codes(file));
    }
    if (codes.empty()) throw error("no codes found with prefix " + prefix);
    return codes;
}

std::vector<predictor> load_models(const std::string& list) {
    std::vector<predictor> models;
    for (const auto& f : split_list(list)) models.push_back(load_predictor(f));
    if (models.empty()) throw error("no models given");
    return models;
}

std::vector<const predictor*> pointers(const std::vector<predictor>& models) {
    std::vector<const predictor*> p;
    for (const auto& m : models) p.push_back(&m);
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Next-destination prediction with graph embeddings and density sketches"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress and warnings");

    // generate-synthetic
    synthetic_config syn;
    std::string syn_out = "trips.csv";
    auto* gen = app.add_subcommand("generate-synthetic", "Write a synthetic trip CSV in the challenge schema");
    gen->add_option("--cities", syn.cities)->capture_default_str();
    gen->add_option("--countries", syn.countries)->capture_default_str();
    gen->add_option("--trips", syn.trips)->capture_default_str();
    gen->add_option("--mean-length", syn.mean_length)->capture_default_str();
    gen->add_option("--min-length", syn.min_length)->capture_default_str();
    gen->add_option("--return-probability", syn.return_probability)->capture_default_str();
    gen->add_option("--seed", syn.seed)->capture_default_str();
    gen->add_option("--output", syn_out)->capture_default_str();

    // split
    std::string split_in, split_train = "train.csv", split_valid = "valid.csv";
    double valid_fraction = 0.2;
    std::uint64_t split_seed = 0;
    auto* spl = app.add_subcommand("split", "Augment trips into examples and hold out final destinations");
    spl->add_option("--input", split_in)->required();
    spl->add_option("--valid-fraction", valid_fraction)->capture_default_str();
    spl->add_option("--seed", split_seed)->capture_default_str();
    spl->add_option("--train-output", split_train)->capture_default_str();
    spl->add_option("--valid-output", split_valid)->capture_default_str();

    // build-graph
    std::string graph_in, graph_holdout, graph_out = "graph.bin";
    auto* bg = app.add_subcommand("build-graph", "Build the city transition graph");
    bg->add_option("--input", graph_in, "Trips CSV")->required();
    bg->add_option("--holdout", graph_holdout, "Validation examples whose final city must stay hidden");
    bg->add_option("--output", graph_out)->capture_default_str();

    // embed
    std::string embed_graph, embed_prefix = "embedding", embed_iters = "1,3";
    std::size_t embed_dim = 1024;
    std::uint64_t embed_seed = 0;
    bool directed_only = false;
    auto* emb = app.add_subcommand("embed", "Compute city embeddings by iterated neighbor averaging");
    emb->add_option("--graph", embed_graph)->required();
    emb->add_option("--dim", embed_dim)->capture_default_str();
    emb->add_option("--iterations", embed_iters)->capture_default_str();
    emb->add_option("--seed", embed_seed)->capture_default_str();
    emb->add_flag("--directed-only", directed_only, "Average over out-neighbors only");
    emb->add_option("--output", embed_prefix, "Output prefix; writes <prefix>.i<N>.bin")->capture_default_str();

    // fit-sketches
    std::vector<std::string> sketch_inputs;
    std::uint32_t sketch_width = 128, sketch_depth = 40;
    bool random_modality = false;
    std::uint64_t sketch_seed = 0;
    std::string sketch_prefix = "codes";
    auto* fit = app.add_subcommand("fit-sketches", "Fit LSH partitionings and write per-city region codes");
    fit->add_option("--embeddings", sketch_inputs)->required();
    fit->add_option("--width", sketch_width)->capture_default_str();
    fit->add_option("--depth", sketch_depth)->capture_default_str();
    fit->add_flag("--random-modality", random_modality, "Append a modality of random codes");
    fit->add_option("--seed", sketch_seed)->capture_default_str();
    fit->add_option("--output", sketch_prefix, "Output prefix; writes <prefix>.<m>.bin")->capture_default_str();

    // train
    std::string train_examples, train_graph, train_codes, train_out = "model.bin";
    training_options topt;
    bool no_flag = false, no_features = false;
    auto* tr = app.add_subcommand("train", "Two-stage training of the sketch-to-sketch network");
    tr->add_option("--examples", train_examples)->required();
    tr->add_option("--graph", train_graph, "Graph file providing the city vocabulary")->required();
    tr->add_option("--codes", train_codes, "Codes prefix written by fit-sketches")->required();
    tr->add_option("--hidden", topt.hidden)->capture_default_str();
    tr->add_option("--lr", topt.optimizer.learning_rate)->capture_default_str();
    tr->add_option("--weight-decay", topt.optimizer.weight_decay)->capture_default_str();
    tr->add_option("--batch", topt.batch)->capture_default_str();
    tr->add_option("--epochs", topt.epochs)->capture_default_str();
    tr->add_option("--finetune-epochs", topt.finetune_epochs)->capture_default_str();
    tr->add_option("--finetune-lr-factor", topt.finetune_lr_factor)->capture_default_str();
    tr->add_option("--decay", topt.input.decay)->capture_default_str();
    tr->add_option("--seed", topt.seed)->capture_default_str();
    tr->add_flag("--no-flag", no_flag, "Drop the is-final input flag");
    tr->add_flag("--no-features", no_features, "Drop numerical and categorical features");
    tr->add_option("--output", train_out)->capture_default_str();

    // predict / evaluate
    std::string models_arg, eval_examples, predict_out = "predictions.csv", report_dir = "report";
    bool boost = false;
    std::size_t top_k_arg = 4;
    auto* pred = app.add_subcommand("predict", "Write top-k city predictions per trip");
    pred->add_option("--model", models_arg, "Comma-separated checkpoints (ensembled)")->required();
    pred->add_option("--examples", eval_examples)->required();
    pred->add_flag("--popularity-boost", boost);
    pred->add_option("--top-k", top_k_arg)->capture_default_str();
    pred->add_option("--output", predict_out)->capture_default_str();

    auto* ev = app.add_subcommand("evaluate", "Precision@k of an ensemble on labelled examples");
    ev->add_option("--model", models_arg, "Comma-separated checkpoints (ensembled)")->required();
    ev->add_option("--examples", eval_examples)->required();
    ev->add_flag("--popularity-boost", boost);
    ev->add_option("--top-k", top_k_arg)->capture_default_str();
    ev->add_option("--report", report_dir)->capture_default_str();

    // ablate
    std::string ablate_config, ablate_seeds = "0,1,2", ablate_out = "ablation.json";
    auto* abl = app.add_subcommand("ablate", "Cumulative ablation table over several seeds");
    abl->add_option("--config", ablate_config);
    abl->add_option("--seeds", ablate_seeds)->capture_default_str();
    abl->add_option("--output", ablate_out)->capture_default_str();

    // run-pipeline: every config key is also a flag; flags override the file.
    std::string pipeline_config_file;
    std::map<std::string, std::string> overrides;
    auto* run = app.add_subcommand("run-pipeline", "Run every stage, reusing artifacts whose fingerprints match");
    run->add_option("--config", pipeline_config_file);
    for (const auto& key : config_keys()) {
        std::string flag = key;
        for (char& ch : flag)
            if (ch == '_') ch = '-';
        run->add_option_function<std::string>("--" + flag, [key, &overrides](const std::string& v) { overrides[key] = v; });
    }

    CLI11_PARSE(app, argc, argv);
    set_quiet(quiet);

    try {
        if (*gen) {
            write_trips_file(syn_out, generate_synthetic(syn));
        } else if (*spl) {
            const auto trips = parse_trips_file(split_in).trips;
            const auto parts = split(trips, valid_fraction, split_seed);
            write_examples_file(split_train, parts.train);
            write_examples_file(split_valid, parts.valid);
            std::cout << "train examples: " << parts.train.size() << ", validation examples: " << parts.valid.size()
                      << '\n';
        } else if (*bg) {
            const auto trips = parse_trips_file(graph_in).trips;
            std::set<std::string> holdout;
            if (!graph_holdout.empty())
                for (const auto& e : read_examples_file(graph_holdout)) holdout.insert(e.trip_id);
            const auto graph = build_graph(graph_sequences(trips, holdout));
            save_graph(graph, graph_out);
            const auto s = degree_stats(graph);
            std::cout << "nodes: " << s.nodes << ", edges: " << s.edges << ", max out-degree: " << s.max_out_degree
                      << ", mean out-degree: " << s.mean_out_degree << '\n';
        } else if (*emb) {
            std::vector<unsigned> iterations;
            for (const auto& s : split_list(embed_iters)) iterations.push_back(static_cast<unsigned>(std::stoul(s)));
            const auto tables = embed_cities(load_graph(embed_graph), embed_dim, iterations, embed_seed, {directed_only});
            for (const auto& t : tables) save_embeddings(t, embed_prefix + ".i" + std::to_string(t.iteration()) + ".bin");
        } else if (*fit) {
            std::vector<codes_matrix> codes;
            for (std::size_t m = 0; m < sketch_inputs.size(); ++m)
                codes.push_back(build_codes(load_embeddings(sketch_inputs[m]), sketch_width, sketch_depth,
                                            sketch_seed + 1000003ULL * m));
            if (random_modality) {
                if (codes.empty()) throw error("random modality needs an embedding file for the city count");
                codes.push_back(build_random_codes(codes.front().cities(), sketch_width, sketch_depth,
                                                   sketch_seed + 1000003ULL * codes.size()));
            }
            for (std::size_t m = 0; m < codes.size(); ++m)
                save_codes(codes[m], sketch_prefix + "." + std::to_string(m) + ".bin");
        } else if (*tr) {
            topt.input.use_flag = !no_flag;
            topt.input.use_features = !no_features;
            const auto examples = read_examples_file(train_examples);
            const auto graph = load_graph(train_graph);
            const predictor model =
                train_two_stage(examples, city_index(graph.node_ids()), load_code_prefix(train_codes), topt);
            save_predictor(model, train_out);
            for (const auto& h : model.history)
                std::cout << "stage " << h.stage << " epoch " << h.epoch << ": mean loss " << h.mean_loss << '\n';
        } else if (*pred) {
            const auto models = load_models(models_arg);
            const auto examples = read_examples_file(eval_examples);
            const auto samples = rank_examples(pointers(models), examples, {boost, top_k_arg});
            std::ofstream os(predict_out);
            os << "utrip_id";
            for (std::size_t i = 1; i <= top_k_arg; ++i) os << ",city_" << i;
            os << '\n';
            for (std::size_t i = 0; i < examples.size(); ++i) {
                os << examples[i].trip_id;
                for (auto c : samples[i].ranked) os << ',' << models.front().cities.id(c);
                os << '\n';
            }
        } else if (*ev) {
            const auto models = load_models(models_arg);
            const auto examples = read_examples_file(eval_examples);
            const auto report = evaluate_models(pointers(models), examples, {boost, top_k_arg});
            fs::create_directories(report_dir);
            std::ofstream(fs::path(report_dir) / "report.json") << report.to_json().dump(2) << '\n';
            write_hits_csv(fs::path(report_dir) / "hits.csv", examples, report);
            std::cout << "precision@" << top_k_arg << ": " << report.precision_at_k << " over " << report.hits.size()
                      << " samples\n";
        } else if (*abl) {
            const pipeline_config config =
                ablate_config.empty() ? default_config(profile::desk) : load_config_file(ablate_config);
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split_list(ablate_seeds)) seeds.push_back(std::stoull(s));
            const auto study = run_ablation_study(config, seeds);
            std::ofstream(ablate_out) << study.to_json().dump(2) << '\n';
            for (std::size_t i = 0; i < study.tables.size(); ++i)
                std::cout << "seed " << study.seeds[i] << "\n" << study.tables[i].to_text();
        } else if (*run) {
            pipeline_config config = pipeline_config_file.empty() ? default_config(profile::desk)
                                                                  : load_config_file(pipeline_config_file);
            apply_settings(config, overrides);
            const auto result = run_pipeline(config);
            std::cout << "precision@" << result.report.k << ": " << result.report.precision_at_k
                      << " (popularity baseline " << result.popularity_baseline << ", return trips "
                      << result.report.return_trips.precision() << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
