#include "emde/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emde/common.hpp"
#include "emde/logging.hpp"

namespace emde {

namespace {
constexpr std::size_t kRankChunk = 512;
}

double popularity_table::weight(std::size_t city) const {
    return std::max(std::log1p(static_cast<double>(final_counts.at(city))), kPopularityFloor);
}

std::vector<double> popularity_boost(std::span<const double> scores, const popularity_table& table) {
    if (table.final_counts.size() != scores.size()) throw error("popularity_boost: table does not cover all cities");
    std::vector<double> out(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) out[c] = scores[c] * table.weight(c);
    return out;
}

std::vector<double> ensemble(std::span<const std::vector<double>> score_vectors) {
    if (score_vectors.empty()) throw error("ensemble: no models");
    const std::size_t n = score_vectors.front().size();
    std::vector<double> out(n, 0.0);
    for (const auto& v : score_vectors) {
        if (v.size() != n) throw error("ensemble: score vectors differ in length");
        for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(score_vectors.size());
    for (double& x : out) x *= inv;
    return out;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    auto better = [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

eval_report precision_at_k(std::span<const eval_sample> samples, std::size_t k) {
    eval_report report;
    report.k = k;
    report.hits.reserve(samples.size());
    std::size_t total = 0;
    for (const auto& s : samples) {
        const std::size_t depth = std::min(k, s.ranked.size());
        const bool hit = std::find(s.ranked.begin(), s.ranked.begin() + static_cast<std::ptrdiff_t>(depth), s.target) !=
                         s.ranked.begin() + static_cast<std::ptrdiff_t>(depth);
        report.hits.push_back(hit ? 1 : 0);
        total += hit;
        auto& bucket = report.by_trip_length[s.trip_length];
        ++bucket.samples;
        bucket.hits += hit;
        if (s.is_return) {
            ++report.return_trips.samples;
            report.return_trips.hits += hit;
        }
    }
    report.precision_at_k = samples.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(samples.size());
    return report;
}

nlohmann::json eval_report::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["samples"] = hits.size();
    j["precision_at_k"] = precision_at_k;
    nlohmann::json lengths = nlohmann::json::array();
    for (const auto& [len, b] : by_trip_length)
        lengths.push_back({{"trip_length", len}, {"samples", b.samples}, {"hits", b.hits}, {"precision", b.precision()}});
    j["by_trip_length"] = lengths;
    j["return_trips"] = {{"samples", return_trips.samples},
                         {"hits", return_trips.hits},
                         {"precision", return_trips.precision()}};
    return j;
}

std::vector<eval_sample> rank_examples(std::span<const predictor* const> models, std::span<const trip_example> examples,
                                       const decode_options& options) {
    if (models.empty()) throw error("rank_examples: no models");
    const city_index& cities = models.front()->cities;
    for (const auto* m : models)
        if (m->cities.ids() != cities.ids()) throw error("rank_examples: models disagree on the city vocabulary");
    if (cities.size() < options.top_k) throw error("rank_examples: fewer cities than requested predictions");
    const popularity_table popularity{models.front()->final_counts};

    std::vector<eval_sample> samples;
    samples.reserve(examples.size());
    std::vector<std::vector<double>> per_model(models.size());
    for (std::size_t start = 0; start < examples.size(); start += kRankChunk) {
        const auto chunk = examples.subspan(start, std::min(kRankChunk, examples.size() - start));
        std::vector<Eigen::MatrixXd> decoded;
        decoded.reserve(models.size());
        for (const auto* m : models) decoded.push_back(decode_scores(*m, chunk));
        for (std::size_t j = 0; j < chunk.size(); ++j) {
            for (std::size_t m = 0; m < models.size(); ++m) {
                const auto col = decoded[m].col(static_cast<Eigen::Index>(j));
                per_model[m].assign(col.data(), col.data() + col.size());
            }
            auto scores = ensemble(per_model);
            if (options.popularity_boost) scores = popularity_boost(scores, popularity);
            const trip_example& ex = chunk[j];
            eval_sample s;
            s.ranked = top_k(scores, options.top_k);
            s.target = ex.target.empty() || !cities.contains(ex.target) ? cities.size() : cities.at(ex.target);
            s.trip_length = ex.trip_length;
            s.is_return = ex.is_return();
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

eval_report evaluate_models(std::span<const predictor* const> models, std::span<const trip_example> examples,
                            const decode_options& options) {
    for (const auto& ex : examples)
        if (ex.target.empty()) throw error("evaluate: example of trip " + ex.trip_id + " has no target");
    const auto samples = rank_examples(models, examples, options);
    return precision_at_k(samples, options.top_k);
}

eval_report evaluate_popularity_baseline(const popularity_table& table, const city_index& cities,
                                         std::span<const trip_example> examples, std::size_t k) {
    std::vector<double> weights(cities.size());
    for (std::size_t c = 0; c < cities.size(); ++c) weights[c] = table.weight(c);
    const auto ranked = top_k(weights, k);
    std::vector<eval_sample> samples;
    for (const auto& ex : examples)
        samples.push_back({ranked, cities.contains(ex.target) ? cities.at(ex.target) : cities.size(), ex.trip_length,
                           ex.is_return()});
    return precision_at_k(samples, k);
}

void write_hits_csv(const std::filesystem::path& path, std::span<const trip_example> examples,
                    const eval_report& report) {
    if (examples.size() != report.hits.size()) throw error("write_hits_csv: report does not match examples");
    std::ofstream os(path);
    if (!os) throw error("cannot write " + path.string());
    os << "utrip_id,target_city,trip_length,is_return,hit\n";
    for (std::size_t i = 0; i < examples.size(); ++i)
        os << examples[i].trip_id << ',' << examples[i].target << ',' << examples[i].trip_length << ','
           << (examples[i].is_return() ? 1 : 0) << ',' << static_cast<int>(report.hits[i]) << '\n';
}

nlohmann::json ablation_table::to_json() const {
    nlohmann::json j;
    nlohmann::json cols = nlohmann::json::array();
    for (std::size_t i = 0; i < columns.size(); ++i) {
        nlohmann::json c = {{"name", columns[i].name},
                            {"precision_at_4", columns[i].precision},
                            {"return_precision_at_4", columns[i].return_precision}};
        if (i == 0)
            c["difference"] = nullptr;
        else
            c["difference"] = columns[i].precision - columns[i - 1].precision;
        cols.push_back(c);
    }
    j["columns"] = cols;
    j["popularity_baseline"] = popularity_baseline;
    return j;
}

std::string ablation_table::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "Metric      ";
    for (const auto& c : columns) os << " | " << c.name;
    os << "\nPrecision@4 ";
    for (const auto& c : columns) os << " | " << c.precision;
    os << "\nDifference  ";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        os << " | ";
        if (i == 0) {
            os << "-";
        } else {
            const double d = columns[i].precision - columns[i - 1].precision;
            os << (d >= 0 ? "+" : "") << d;
        }
    }
    os << '\n';
    return os.str();
}

ablation_table ablation_run(const prepared_data& data, const ablation_options& options) {
    if (options.ensemble_size < 1) throw error("ablation: ensemble size must be at least 1");
    std::vector<trip_example> finals;
    for (const auto& ex : data.train)
        if (ex.is_final) finals.push_back(ex);

    auto train = [&](std::span<const trip_example> examples, bool flag, bool features, std::uint64_t seed) {
        training_options o = options.base;
        o.input.use_flag = flag;
        o.input.use_features = features;
        o.seed = seed;
        return train_two_stage(examples, data.cities, data.codes, o);
    };
    auto column = [&](std::string name, std::span<const predictor* const> models, bool boost) {
        const auto report = evaluate_models(models, data.valid, {boost, 4});
        log_info("ablation " + name + ": precision@4 " + std::to_string(report.precision_at_k));
        return ablation_column{std::move(name), report.precision_at_k, report.return_trips.precision()};
    };

    ablation_table table;
    const std::uint64_t seed = options.base.seed;

    const predictor basic = train(finals, false, false, seed);
    const predictor* basic_ptr = &basic;
    table.columns.push_back(column("Basic", {&basic_ptr, 1}, false));

    const predictor with_data = train(data.train, true, false, seed);
    const predictor* data_ptr = &with_data;
    table.columns.push_back(column("+Data", {&data_ptr, 1}, false));

    std::vector<predictor> full;
    full.reserve(options.ensemble_size);
    full.push_back(train(data.train, true, true, seed));
    const predictor* features_ptr = &full.front();
    table.columns.push_back(column("+Features", {&features_ptr, 1}, false));
    table.columns.push_back(column("+Popularity", {&features_ptr, 1}, true));

    for (std::size_t m = 1; m < options.ensemble_size; ++m) full.push_back(train(data.train, true, true, seed + m));
    std::vector<const predictor*> members;
    for (const auto& p : full) members.push_back(&p);
    table.columns.push_back(column("+Ensembling", members, true));

    table.popularity_baseline =
        evaluate_popularity_baseline({full.front().final_counts}, data.cities, data.valid).precision_at_k;
    return table;
}

}  // namespace emde
