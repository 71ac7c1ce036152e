#include "emde/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "emde/common.hpp"

namespace emde {

namespace {

// Features with closed value sets get fixed vocabularies rather than train-derived ones.
std::vector<std::string> fixed_vocab(std::size_t feature) {
    const auto name = kCategoricalNames[feature];
    std::vector<std::string> v;
    if (name == "checkin_weekday" || name == "checkout_weekday") {
        for (int d = 0; d < 7; ++d) v.push_back(std::to_string(d));
    } else if (name == "month") {
        for (int m = 1; m <= 12; ++m) v.push_back(std::to_string(m));
    } else if (name == "year") {
        v = {"2015", "2016", "2017"};
    }
    return v;
}

template <class T>
void write_row(const model_input& in, const input_options& options, std::span<T> out) {
    std::size_t pos = 0;
    for (const sketch* s : {&in.first_city, &in.prev_city, &in.all_cities})
        for (double c : s->cells()) out[pos++] = static_cast<T>(c);
    if (options.use_features)
        for (double v : in.numerical) out[pos++] = static_cast<T>(v);
    if (options.use_flag) out[pos++] = static_cast<T>(in.is_final);
    if (pos != out.size()) throw error("write_dense_input: output span has wrong length");
}

}  // namespace

city_index::city_index(std::vector<city_id> ids) : ids_(std::move(ids)) {
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (!index_.emplace(ids_[i], i).second) throw error("duplicate city id '" + ids_[i] + "'");
}

std::size_t city_index::at(const city_id& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw error("unknown city '" + id + "'");
    return it->second;
}

feature_encoder feature_encoder::fit(std::span<const trip_example> train) {
    feature_encoder enc;
    const double n = static_cast<double>(train.size());
    for (const auto& ex : train)
        for (std::size_t i = 0; i < kNumericalFeatures; ++i) enc.mean_[i] += ex.numerical[i];
    for (double& m : enc.mean_) m = train.empty() ? 0.0 : m / n;
    for (const auto& ex : train)
        for (std::size_t i = 0; i < kNumericalFeatures; ++i) {
            const double d = ex.numerical[i] - enc.mean_[i];
            enc.stddev_[i] += d * d;
        }
    for (double& s : enc.stddev_) {
        s = train.empty() ? 0.0 : std::sqrt(s / n);
        if (!(s > 1e-12)) s = 1.0;
    }
    for (std::size_t f = 0; f < kCategoricalFeatures; ++f) {
        auto fixed = fixed_vocab(f);
        if (!fixed.empty()) {
            enc.vocab_[f] = std::move(fixed);
            continue;
        }
        std::set<std::string> seen;
        for (const auto& ex : train) seen.insert(ex.categorical[f]);
        enc.vocab_[f].assign(seen.begin(), seen.end());
    }
    enc.rebuild_lookup();
    return enc;
}

void feature_encoder::rebuild_lookup() {
    for (std::size_t f = 0; f < kCategoricalFeatures; ++f) {
        lookup_[f].clear();
        for (std::size_t i = 0; i < vocab_[f].size(); ++i) lookup_[f].emplace(vocab_[f][i], static_cast<std::int32_t>(i + 1));
    }
}

std::array<double, kNumericalFeatures> feature_encoder::standardize(
    const std::array<double, kNumericalFeatures>& raw) const {
    std::array<double, kNumericalFeatures> out{};
    for (std::size_t i = 0; i < kNumericalFeatures; ++i) out[i] = (raw[i] - mean_[i]) / stddev_[i];
    return out;
}

std::array<std::int32_t, kCategoricalFeatures> feature_encoder::encode(
    const std::array<std::string, kCategoricalFeatures>& raw) const {
    std::array<std::int32_t, kCategoricalFeatures> out{};
    for (std::size_t f = 0; f < kCategoricalFeatures; ++f) {
        auto it = lookup_[f].find(raw[f]);
        out[f] = it == lookup_[f].end() ? 0 : it->second;
    }
    return out;
}

nlohmann::json feature_encoder::to_json() const {
    nlohmann::json j;
    j["mean"] = mean_;
    j["stddev"] = stddev_;
    nlohmann::json vocab = nlohmann::json::object();
    for (std::size_t f = 0; f < kCategoricalFeatures; ++f) vocab[std::string(kCategoricalNames[f])] = vocab_[f];
    j["vocab"] = vocab;
    return j;
}

feature_encoder feature_encoder::from_json(const nlohmann::json& j) {
    feature_encoder enc;
    enc.mean_ = j.at("mean").get<std::array<double, kNumericalFeatures>>();
    enc.stddev_ = j.at("stddev").get<std::array<double, kNumericalFeatures>>();
    for (std::size_t f = 0; f < kCategoricalFeatures; ++f)
        enc.vocab_[f] = j.at("vocab").at(std::string(kCategoricalNames[f])).get<std::vector<std::string>>();
    enc.rebuild_lookup();
    return enc;
}

model_input assemble_input(const trip_example& example, const city_index& cities,
                           std::span<const codes_matrix> codes, const feature_encoder& features, double decay) {
    if (example.prefix.empty()) throw error("assemble_input: empty prefix");
    std::vector<sketch> history;
    history.reserve(example.prefix.size());
    for (const auto& city : example.prefix) history.push_back(item_sketch(codes, cities.at(city)));

    model_input in;
    in.first_city = history.front();
    in.prev_city = history.back();
    in.all_cities = normalize_widthwise(aggregate(history, decay));
    in.numerical = features.standardize(example.numerical);
    in.categorical = features.encode(example.categorical);
    in.is_final = example.is_final ? 1.0 : 0.0;
    return in;
}

std::size_t dense_input_width(std::span<const codes_matrix> codes, const input_options& options) {
    std::size_t sketch_len = 0;
    for (const auto& c : codes) sketch_len += c.shape().size();
    return 3 * sketch_len + (options.use_features ? kNumericalFeatures : 0) + (options.use_flag ? 1 : 0);
}

void write_dense_input(const model_input& input, const input_options& options, std::span<float> out) {
    write_row(input, options, out);
}

void write_dense_input(const model_input& input, const input_options& options, std::span<double> out) {
    write_row(input, options, out);
}

std::vector<std::size_t> embedding_dims(const input_options& options) {
    if (!options.use_features) return {};
    std::vector<std::size_t> dims;
    for (auto name : kCategoricalNames)
        dims.push_back(name == "prev_hotel_country" || name == "affiliate_id" ? options.wide_embedding
                                                                               : options.narrow_embedding);
    return dims;
}

}  // namespace emde
