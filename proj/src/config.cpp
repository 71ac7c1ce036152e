#include "emde/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "emde/common.hpp"

namespace emde {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw error("config: bad value '" + value + "' for " + key);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw error("config: bad boolean '" + value + "' for " + key);
}

std::vector<unsigned> parse_list(const std::string& key, std::string value) {
    if (!value.empty() && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    std::vector<unsigned> out;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number<unsigned>(key, trim(item)));
    if (out.empty()) throw error("config: empty list for " + key);
    return out;
}

using setter = std::function<void(pipeline_config&, const std::string&, const std::string&)>;
using getter = std::function<std::string(const pipeline_config&)>;

struct key_spec {
    std::string name;
    setter set;
    getter get;
};

template <class T>
std::string num(T v) {
    if constexpr (std::is_floating_point_v<T>) {
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, p);
    } else {
        return std::to_string(v);
    }
}

#define EMDE_NUMERIC_KEY(NAME, FIELD)                                                                          \
    key_spec {                                                                                                 \
        NAME, [](pipeline_config& c, const std::string& k,                                                     \
                 const std::string& v) { c.FIELD = parse_number<std::remove_cvref_t<decltype(c.FIELD)>>(k, v); }, \
            [](const pipeline_config& c) { return num(c.FIELD); }                                              \
    }
#define EMDE_BOOL_KEY(NAME, FIELD)                                                                        \
    key_spec {                                                                                            \
        NAME, [](pipeline_config& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); }, \
            [](const pipeline_config& c) { return std::string(c.FIELD ? "true" : "false"); }              \
    }

const std::vector<key_spec>& specs() {
    static const std::vector<key_spec> table = {
        {"profile",
         [](pipeline_config& c, const std::string& k, const std::string& v) {
             if (v == "desk" || v == "desk-scale")
                 c.scale = profile::desk;
             else if (v == "paper" || v == "paper-scale")
                 c.scale = profile::paper;
             else
                 throw error("config: bad value '" + v + "' for " + k);
         },
         [](const pipeline_config& c) { return std::string(c.scale == profile::desk ? "desk" : "paper"); }},
        {"work_dir", [](pipeline_config& c, const std::string&, const std::string& v) { c.work_dir = v; },
         [](const pipeline_config& c) { return c.work_dir.string(); }},
        {"trips", [](pipeline_config& c, const std::string&, const std::string& v) { c.trips = v; },
         [](const pipeline_config& c) { return c.trips.string(); }},
        EMDE_NUMERIC_KEY("cities", synthetic.cities),
        EMDE_NUMERIC_KEY("countries", synthetic.countries),
        EMDE_NUMERIC_KEY("synthetic_trips", synthetic.trips),
        EMDE_NUMERIC_KEY("mean_length", synthetic.mean_length),
        EMDE_NUMERIC_KEY("min_length", synthetic.min_length),
        EMDE_NUMERIC_KEY("return_probability", synthetic.return_probability),
        EMDE_NUMERIC_KEY("valid_fraction", valid_fraction),
        EMDE_NUMERIC_KEY("dim", dim),
        {"iterations",
         [](pipeline_config& c, const std::string& k, const std::string& v) { c.iterations = parse_list(k, v); },
         [](const pipeline_config& c) {
             std::string s;
             for (std::size_t i = 0; i < c.iterations.size(); ++i) s += (i ? "," : "") + std::to_string(c.iterations[i]);
             return s;
         }},
        EMDE_BOOL_KEY("directed_only", directed_only),
        EMDE_NUMERIC_KEY("width", width),
        EMDE_NUMERIC_KEY("depth", depth),
        EMDE_BOOL_KEY("random_modality", random_modality),
        EMDE_NUMERIC_KEY("hidden", training.hidden),
        EMDE_NUMERIC_KEY("blocks", training.blocks),
        EMDE_NUMERIC_KEY("leaky_slope", training.leaky_slope),
        EMDE_NUMERIC_KEY("bn_momentum", training.bn_momentum),
        EMDE_NUMERIC_KEY("lr", training.optimizer.learning_rate),
        EMDE_NUMERIC_KEY("beta1", training.optimizer.beta1),
        EMDE_NUMERIC_KEY("beta2", training.optimizer.beta2),
        EMDE_NUMERIC_KEY("weight_decay", training.optimizer.weight_decay),
        EMDE_NUMERIC_KEY("batch", training.batch),
        EMDE_NUMERIC_KEY("epochs", training.epochs),
        EMDE_NUMERIC_KEY("finetune_epochs", training.finetune_epochs),
        EMDE_NUMERIC_KEY("finetune_lr_factor", training.finetune_lr_factor),
        EMDE_NUMERIC_KEY("decay", training.input.decay),
        EMDE_BOOL_KEY("use_flag", training.input.use_flag),
        EMDE_BOOL_KEY("use_features", training.input.use_features),
        EMDE_NUMERIC_KEY("wide_embedding", training.input.wide_embedding),
        EMDE_NUMERIC_KEY("narrow_embedding", training.input.narrow_embedding),
        EMDE_NUMERIC_KEY("ensemble", ensemble),
        EMDE_BOOL_KEY("popularity_boost", popularity_boost),
        EMDE_NUMERIC_KEY("top_k", top_k),
        EMDE_BOOL_KEY("strict_deterministic", strict_deterministic),
        EMDE_NUMERIC_KEY("seed", seed),
    };
    return table;
}

#undef EMDE_NUMERIC_KEY
#undef EMDE_BOOL_KEY

std::string normalize_key(std::string key) {
    for (char& ch : key)
        if (ch == '-') ch = '_';
    return key;
}

}  // namespace

pipeline_config default_config(profile p) {
    pipeline_config c;
    c.scale = p;
    if (p == profile::paper) {
        c.dim = 1024;
        c.width = 128;
        c.depth = 40;
        c.training.hidden = 3000;
    }
    return c;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& s : specs()) k.push_back(s.name);
        return k;
    }();
    return keys;
}

void apply_setting(pipeline_config& config, const std::string& key, const std::string& value) {
    const std::string k = normalize_key(key);
    for (const auto& s : specs()) {
        if (s.name == k) {
            s.set(config, k, trim(value));
            return;
        }
    }
    throw error("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw error("config line " + std::to_string(line_no) + ": expected key = value");
        out[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
    }
    return out;
}

void apply_settings(pipeline_config& config, const std::map<std::string, std::string>& settings) {
    if (auto it = settings.find("profile"); it != settings.end()) {
        pipeline_config probe;
        apply_setting(probe, "profile", it->second);
        config = default_config(probe.scale);
    }
    for (const auto& [k, v] : settings)
        if (k != "profile") apply_setting(config, k, v);
}

pipeline_config load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw error("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    pipeline_config config = default_config(profile::desk);
    apply_settings(config, parse_config_text(ss.str()));
    return config;
}

std::string describe(const pipeline_config& config) {
    std::string out;
    for (const auto& s : specs()) out += s.name + " = " + s.get(config) + "\n";
    return out;
}

std::uint64_t stage_seed(const pipeline_config& config, std::string_view stage) {
    fingerprint_builder fb;
    fb.add(stage);
    return mix64(config.seed, fb.value(), 0);
}

}  // namespace emde
