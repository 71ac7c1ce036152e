#include "emde/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "emde/binary_io.hpp"
#include "emde/common.hpp"
#include "emde/logging.hpp"
#include "emde/scoring.hpp"

namespace emde {

namespace {

constexpr char kModelMagic[5] = "EMDM";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kDecodeChunk = 256;

std::vector<sketch_shape> shapes_of(std::span<const codes_matrix> codes) {
    std::vector<sketch_shape> shapes;
    for (const auto& c : codes) shapes.push_back(c.shape());
    return shapes;
}

std::vector<const trip_example*> pointers(std::span<const trip_example> examples) {
    std::vector<const trip_example*> p;
    p.reserve(examples.size());
    for (const auto& e : examples) p.push_back(&e);
    return p;
}

void run_stage(predictor& model, const std::vector<const trip_example*>& examples, std::size_t epochs,
               double lr_scale, int stage, std::mt19937_64& rng) {
    const auto& opt = model.options;
    using net_t = network<float>;
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const trip_example*> batch_examples;
    net_t::params grads = model.net.zero_like();
    net_t::cache cache;
    net_t::matrix dlogits;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch) {
            const std::size_t end = std::min(order.size(), start + opt.batch);
            if (end - start < 2) break;  // batch norm needs two samples
            batch_examples.clear();
            for (std::size_t i = start; i < end; ++i) batch_examples.push_back(examples[order[i]]);
            const auto enc = encode_batch<float>(batch_examples, model.cities, model.codes, model.features,
                                                 opt.input, true);
            const auto logits = model.net.forward(enc.input, run_mode::train, &cache);
            const float loss = model.net.loss(logits, enc.targets, &dlogits);
            if (!std::isfinite(loss))
                throw error("non-finite training loss at stage " + std::to_string(stage) + ", epoch " +
                            std::to_string(epoch) + ", step " + std::to_string(steps));
            grads.set_zero();
            model.net.backward(enc.input, cache, dlogits, grads);
            model.optimizer.step(model.net.parameters(), grads, lr_scale);
            model.net.update_running_stats(cache);
            loss_sum += loss;
            ++steps;
        }
        model.history.push_back({stage, epoch, steps ? loss_sum / static_cast<double>(steps) : 0.0, steps});
    }
}

}  // namespace

template <class Scalar>
encoded_batch<Scalar> encode_batch(std::span<const trip_example* const> examples, const city_index& cities,
                                   std::span<const codes_matrix> codes, const feature_encoder& features,
                                   const input_options& options, bool with_targets) {
    const auto B = static_cast<Eigen::Index>(examples.size());
    const std::size_t dense = dense_input_width(codes, options);
    std::size_t total_depth = 0;
    for (const auto& c : codes) total_depth += c.depth();

    encoded_batch<Scalar> out;
    out.input.dense.resize(static_cast<Eigen::Index>(dense), B);
    out.input.categorical.resize(options.use_features ? static_cast<Eigen::Index>(kCategoricalFeatures) : 0, B);
    if (with_targets) out.targets.resize(static_cast<Eigen::Index>(total_depth), B);

    for (Eigen::Index j = 0; j < B; ++j) {
        const trip_example& ex = *examples[static_cast<std::size_t>(j)];
        const model_input in = assemble_input(ex, cities, codes, features, options.decay);
        write_dense_input(in, options, std::span<Scalar>(out.input.dense.col(j).data(), dense));
        if (options.use_features)
            for (std::size_t f = 0; f < kCategoricalFeatures; ++f)
                out.input.categorical(static_cast<Eigen::Index>(f), j) = in.categorical[f];
        if (with_targets) {
            const std::size_t target = cities.at(ex.target);
            Eigen::Index row = 0;
            for (const auto& c : codes)
                for (auto region : c.row(target)) out.targets(row++, j) = region;
        }
    }
    return out;
}

template encoded_batch<float> encode_batch<float>(std::span<const trip_example* const>, const city_index&,
                                                  std::span<const codes_matrix>, const feature_encoder&,
                                                  const input_options&, bool);
template encoded_batch<double> encode_batch<double>(std::span<const trip_example* const>, const city_index&,
                                                    std::span<const codes_matrix>, const feature_encoder&,
                                                    const input_options&, bool);

network_shape make_network_shape(std::span<const codes_matrix> codes, const feature_encoder& features,
                                 const training_options& options) {
    network_shape shape;
    shape.dense_inputs = dense_input_width(codes, options.input);
    shape.embedding_dims = embedding_dims(options.input);
    for (std::size_t f = 0; f < shape.embedding_dims.size(); ++f) shape.vocab_sizes.push_back(features.vocab_size(f));
    shape.hidden = options.hidden;
    shape.blocks = options.blocks;
    shape.output_shapes = shapes_of(codes);
    shape.leaky_slope = options.leaky_slope;
    shape.bn_momentum = options.bn_momentum;
    return shape;
}

predictor train_two_stage(std::span<const trip_example> train, const city_index& cities,
                          std::vector<codes_matrix> codes, const training_options& options) {
    if (train.empty()) throw error("train: no training examples");
    if (codes.empty()) throw error("train: no code modalities");
    if (options.batch < 2) throw error("train: batch size must be at least 2");
    for (const auto& c : codes)
        if (c.cities() != cities.size()) throw error("train: codes do not cover the city vocabulary");

    predictor model;
    model.options = options;
    model.cities = cities;
    model.codes = std::move(codes);
    model.features = feature_encoder::fit(train);
    model.final_counts.assign(cities.size(), 0);
    for (const auto& ex : train)
        if (ex.is_final) ++model.final_counts[cities.at(ex.target)];
    model.net = network<float>(make_network_shape(model.codes, model.features, options), mix64(options.seed, 1, 0));
    model.optimizer = adamw<float>(model.net, options.optimizer);

    std::mt19937_64 rng(mix64(options.seed, 2, 0));
    const auto all = pointers(train);
    run_stage(model, all, options.epochs, 1.0, 1, rng);

    if (options.finetune_epochs > 0) {
        std::vector<const trip_example*> finals;
        for (const auto* e : all)
            if (e->is_final) finals.push_back(e);
        if (finals.size() < 2)
            log_warning("no final-destination examples to fine-tune on; skipping stage 2");
        else
            run_stage(model, finals, options.finetune_epochs, options.finetune_lr_factor, 2, rng);
    }
    return model;
}

double evaluate_loss(const predictor& model, std::span<const trip_example> examples) {
    const auto all = pointers(examples);
    double total = 0.0;
    for (std::size_t start = 0; start < all.size(); start += kDecodeChunk) {
        const std::size_t end = std::min(all.size(), start + kDecodeChunk);
        std::span<const trip_example* const> chunk(all.data() + start, end - start);
        const auto enc = encode_batch<float>(chunk, model.cities, model.codes, model.features, model.options.input, true);
        const auto logits = model.net.forward(enc.input, run_mode::eval);
        total += static_cast<double>(model.net.loss(logits, enc.targets)) * static_cast<double>(chunk.size());
    }
    return all.empty() ? 0.0 : total / static_cast<double>(all.size());
}

Eigen::MatrixXd decode_scores(const predictor& model, std::span<const trip_example> examples) {
    const auto all = pointers(examples);
    Eigen::MatrixXd scores(static_cast<Eigen::Index>(model.cities.size()), static_cast<Eigen::Index>(all.size()));
    std::vector<double> logs;
    for (std::size_t start = 0; start < all.size(); start += kDecodeChunk) {
        const std::size_t end = std::min(all.size(), start + kDecodeChunk);
        std::span<const trip_example* const> chunk(all.data() + start, end - start);
        const auto enc = encode_batch<float>(chunk, model.cities, model.codes, model.features, model.options.input, false);
        const auto probs = model.net.row_softmax(model.net.forward(enc.input, run_mode::eval));
        logs.resize(static_cast<std::size_t>(probs.rows()));
        for (Eigen::Index j = 0; j < probs.cols(); ++j) {
            for (Eigen::Index i = 0; i < probs.rows(); ++i)
                logs[static_cast<std::size_t>(i)] = std::log(std::max(static_cast<double>(probs(i, j)), kScoreFloor));
            auto col = scores.col(static_cast<Eigen::Index>(start) + j);
            score_items_from_logs(logs, model.codes, std::span<double>(col.data(), static_cast<std::size_t>(col.size())));
        }
    }
    return scores;
}

namespace {

nlohmann::json options_to_json(const training_options& o) {
    return {
        {"hidden", o.hidden},
        {"blocks", o.blocks},
        {"leaky_slope", o.leaky_slope},
        {"bn_momentum", o.bn_momentum},
        {"lr", o.optimizer.learning_rate},
        {"beta1", o.optimizer.beta1},
        {"beta2", o.optimizer.beta2},
        {"adam_eps", o.optimizer.epsilon},
        {"weight_decay", o.optimizer.weight_decay},
        {"batch", o.batch},
        {"epochs", o.epochs},
        {"finetune_epochs", o.finetune_epochs},
        {"finetune_lr_factor", o.finetune_lr_factor},
        {"seed", o.seed},
        {"use_flag", o.input.use_flag},
        {"use_features", o.input.use_features},
        {"decay", o.input.decay},
        {"wide_embedding", o.input.wide_embedding},
        {"narrow_embedding", o.input.narrow_embedding},
    };
}

training_options options_from_json(const nlohmann::json& j) {
    training_options o;
    o.hidden = j.at("hidden");
    o.blocks = j.at("blocks");
    o.leaky_slope = j.at("leaky_slope");
    o.bn_momentum = j.at("bn_momentum");
    o.optimizer.learning_rate = j.at("lr");
    o.optimizer.beta1 = j.at("beta1");
    o.optimizer.beta2 = j.at("beta2");
    o.optimizer.epsilon = j.at("adam_eps");
    o.optimizer.weight_decay = j.at("weight_decay");
    o.batch = j.at("batch");
    o.epochs = j.at("epochs");
    o.finetune_epochs = j.at("finetune_epochs");
    o.finetune_lr_factor = j.at("finetune_lr_factor");
    o.seed = j.at("seed");
    o.input.use_flag = j.at("use_flag");
    o.input.use_features = j.at("use_features");
    o.input.decay = j.at("decay");
    o.input.wide_embedding = j.at("wide_embedding");
    o.input.narrow_embedding = j.at("narrow_embedding");
    return o;
}

void write_params(std::ostream& os, const network<float>::params& p) {
    p.visit([&](const std::string& name, const float* data, Eigen::Index n, bool) {
        io::write_string(os, name);
        io::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(n));
        io::write_span<float>(os, std::span<const float>(data, static_cast<std::size_t>(n)));
    });
}

void read_params(std::istream& is, network<float>::params& p) {
    p.visit([&](const std::string& name, float* data, Eigen::Index n, bool) {
        if (io::read_string(is, 256) != name) throw error("checkpoint: unexpected tensor, wanted " + name);
        if (io::read_pod<std::uint64_t>(is) != static_cast<std::uint64_t>(n))
            throw error("checkpoint: tensor " + name + " has the wrong size");
        io::read_span<float>(is, std::span<float>(data, static_cast<std::size_t>(n)));
    });
}

}  // namespace

void save_predictor(const predictor& model, const std::filesystem::path& path) {
    nlohmann::json meta;
    meta["options"] = options_to_json(model.options);
    meta["cities"] = model.cities.ids();
    meta["features"] = model.features.to_json();
    meta["final_counts"] = model.final_counts;
    nlohmann::json modalities = nlohmann::json::array();
    for (const auto& c : model.codes)
        modalities.push_back({{"depth", c.depth()},
                              {"width", c.width()},
                              {"kind", c.kind() == modality_kind::lsh ? "lsh" : "random"},
                              {"source_iteration", c.source_iteration()},
                              {"seed", c.seed()}});
    meta["modalities"] = modalities;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : model.history)
        history.push_back({{"stage", h.stage}, {"epoch", h.epoch}, {"mean_loss", h.mean_loss}, {"steps", h.steps}});
    meta["history"] = history;
    meta["optimizer_steps"] = model.optimizer.steps();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw error("cannot write " + path.string());
    io::write_header(os, kModelMagic, kModelVersion, model.fingerprint);
    io::write_string(os, meta.dump());
    for (const auto& c : model.codes) io::write_span<std::uint16_t>(os, c.data());
    write_params(os, model.net.parameters());
    for (std::size_t l = 0; l < model.net.running_stats().mean.size(); ++l) {
        const auto& m = model.net.running_stats().mean[l];
        const auto& v = model.net.running_stats().var[l];
        io::write_span<float>(os, std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
        io::write_span<float>(os, std::span<const float>(v.data(), static_cast<std::size_t>(v.size())));
    }
    write_params(os, model.optimizer.first_moment());
    write_params(os, model.optimizer.second_moment());
    if (!os) throw error("write failed: " + path.string());
}

predictor load_predictor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw error("cannot open " + path.string());
    predictor model;
    model.fingerprint = io::read_header(is, kModelMagic, kModelVersion);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_string(is));
    } catch (const nlohmann::json::exception& e) {
        throw error(std::string("checkpoint: corrupt metadata: ") + e.what());
    }
    model.options = options_from_json(meta.at("options"));
    model.cities = city_index(meta.at("cities").get<std::vector<city_id>>());
    model.features = feature_encoder::from_json(meta.at("features"));
    model.final_counts = meta.at("final_counts").get<std::vector<std::uint64_t>>();
    for (const auto& m : meta.at("modalities")) {
        const bool lsh = m.at("kind") == "lsh";
        codes_matrix c(model.cities.size(), {m.at("depth").get<std::uint32_t>(), m.at("width").get<std::uint32_t>()},
                       lsh ? modality_kind::lsh : modality_kind::random, m.at("source_iteration").get<std::uint32_t>(),
                       m.at("seed").get<std::uint64_t>());
        model.codes.push_back(std::move(c));
    }
    for (const auto& h : meta.at("history"))
        model.history.push_back({h.at("stage"), h.at("epoch"), h.at("mean_loss"), h.at("steps")});
    for (auto& c : model.codes) {
        for (std::size_t r = 0; r < c.cities(); ++r) io::read_span<std::uint16_t>(is, c.row(r));
    }
    model.net = network<float>(make_network_shape(model.codes, model.features, model.options), 0);
    read_params(is, model.net.parameters());
    for (std::size_t l = 0; l < model.net.running_stats().mean.size(); ++l) {
        auto& m = model.net.running_stats().mean[l];
        auto& v = model.net.running_stats().var[l];
        io::read_span<float>(is, std::span<float>(m.data(), static_cast<std::size_t>(m.size())));
        io::read_span<float>(is, std::span<float>(v.data(), static_cast<std::size_t>(v.size())));
    }
    model.optimizer = adamw<float>(model.net, model.options.optimizer);
    read_params(is, model.optimizer.first_moment());
    read_params(is, model.optimizer.second_moment());
    model.optimizer.set_steps(meta.at("optimizer_steps").get<std::uint64_t>());
    return model;
}

}  // namespace emde
