#ifndef PRIORSSL_CONFIG_HPP
#define PRIORSSL_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorssl/active.hpp"
#include "priorssl/io.hpp"
#include "priorssl/rng.hpp"
#include "priorssl/train.hpp"

namespace priorssl {

// ---------------------------------------------------------------------------
// Minimal TOML-style config reader: [section] headers, `key = value` pairs,
// `#` comments, values of type integer, real, boolean, quoted string, or a
// flat array of those. Keys are exposed as "section.key".

struct ConfigValue {
    enum class Kind { integer, real, boolean, text, array };
    Kind kind = Kind::integer;
    long long i = 0;
    double d = 0.0;
    bool b = false;
    std::string s;
    std::vector<ConfigValue> items;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline bool looks_like_integer(const std::string& s) {
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

inline ConfigValue parse_scalar(const std::string& raw, const std::string& where) {
    ConfigValue v;
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        v.kind = ConfigValue::Kind::text;
        v.s = raw.substr(1, raw.size() - 2);
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = ConfigValue::Kind::boolean;
        v.b = raw == "true";
        return v;
    }
    if (looks_like_integer(raw)) {
        v.kind = ConfigValue::Kind::integer;
        v.i = std::stoll(raw);
        return v;
    }
    char* end = nullptr;
    const double d = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0')
        throw std::invalid_argument(where + ": cannot parse value '" + raw + "'");
    v.kind = ConfigValue::Kind::real;
    v.d = d;
    return v;
}

inline ConfigValue parse_value(const std::string& raw, const std::string& where) {
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']')
            throw std::invalid_argument(where + ": unterminated array");
        ConfigValue v;
        v.kind = ConfigValue::Kind::array;
        const std::string body = trim(raw.substr(1, raw.size() - 2));
        if (body.empty()) return v;
        std::size_t start = 0;
        bool in_string = false;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            if (i < body.size() && body[i] == '"') in_string = !in_string;
            if (i == body.size() || (body[i] == ',' && !in_string)) {
                const std::string item = trim(body.substr(start, i - start));
                if (item.empty())
                    throw std::invalid_argument(where + ": empty array element");
                v.items.push_back(parse_scalar(item, where));
                start = i + 1;
            }
        }
        return v;
    }
    if (raw.empty()) throw std::invalid_argument(where + ": missing value");
    return parse_scalar(raw, where);
}

inline std::string canonical_value(const ConfigValue& v) {
    switch (v.kind) {
        case ConfigValue::Kind::integer: return std::to_string(v.i);
        case ConfigValue::Kind::real: return fmt_double(v.d);
        case ConfigValue::Kind::boolean: return v.b ? "true" : "false";
        case ConfigValue::Kind::text: return '"' + v.s + '"';
        case ConfigValue::Kind::array: {
            std::string out = "[";
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) out += ", ";
                out += canonical_value(v.items[i]);
            }
            return out + "]";
        }
    }
    return "?";
}

}  // namespace detail

class ConfigTable {
public:
    static ConfigTable parse_text(const std::string& text, const std::string& name) {
        ConfigTable table;
        std::istringstream in(text);
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string where = name + ": line " + std::to_string(line_no);
            line = detail::trim(detail::strip_comment(line));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::invalid_argument(where + ": malformed section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw std::invalid_argument(where + ": empty section name");
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument(where + ": expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            if (key.empty()) throw std::invalid_argument(where + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (table.values_.count(full))
                throw std::invalid_argument(where + ": duplicate key '" + full + "'");
            table.values_[full] = detail::parse_value(detail::trim(line.substr(eq + 1)), where);
        }
        return table;
    }

    static ConfigTable parse_file(const std::string& path) {
        return parse_text(read_text_file(path), path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    long long get_int(const std::string& key, long long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.kind != ConfigValue::Kind::integer)
            throw std::invalid_argument("config key '" + key + "' must be an integer");
        return it->second.i;
    }

    double get_real(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.kind == ConfigValue::Kind::integer)
            return static_cast<double>(it->second.i);
        if (it->second.kind != ConfigValue::Kind::real)
            throw std::invalid_argument("config key '" + key + "' must be a number");
        return it->second.d;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.kind != ConfigValue::Kind::boolean)
            throw std::invalid_argument("config key '" + key + "' must be true or false");
        return it->second.b;
    }

    std::string get_text(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.kind != ConfigValue::Kind::text)
            throw std::invalid_argument("config key '" + key + "' must be a quoted string");
        return it->second.s;
    }

    std::vector<long long> get_int_array(const std::string& key,
                                         std::vector<long long> fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second.kind != ConfigValue::Kind::array)
            throw std::invalid_argument("config key '" + key + "' must be an array");
        std::vector<long long> out;
        for (const auto& item : it->second.items) {
            if (item.kind != ConfigValue::Kind::integer)
                throw std::invalid_argument("config key '" + key + "' must hold integers");
            out.push_back(item.i);
        }
        return out;
    }

    // sorted-key serialization, independent of file formatting and comments
    std::string canonical() const {
        std::string out;
        for (const auto& [key, value] : values_) {
            out += key;
            out += " = ";
            out += detail::canonical_value(value);
            out += "\n";
        }
        return out;
    }

    // 16 hex chars identifying the canonicalized config
    std::string hash() const {
        const std::string c = canonical();
        const std::uint64_t h = fnv1a64(c.data(), c.size());
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    std::map<std::string, ConfigValue> values_;
};

// ---------------------------------------------------------------------------
// Typed experiment description assembled from a config file.

struct DatasetSpec {
    std::string kind = "moons";  // moons | blobs | embedding
    std::size_t n = 600;         // training pool size for generators
    double noise = 0.1;          // moons noise
    std::size_t classes = 2;     // blob class count
    double spread = 1.0;         // blob within-class std
    double test_fraction = 0.25; // generated test set size relative to n
    std::string embedding_path;
    std::string labels_path;
};

struct SelectionSpec {
    SelectionMethod method = SelectionMethod::active;
    std::size_t m = 10;
    bool stratified = false;  // truth-stratified random pick, sweep harness only
};

struct FinetuneSpec {
    std::size_t C = 6;
    std::size_t K = 10;
    std::size_t epochs = 40;
    double learning_rate = 0.01;
    bool enabled = true;  // disabled: fine-tuned features = raw features
};

struct PropagationSpec {
    std::string mode = "cluster";  // cluster | llgc | oracle | none
    std::vector<std::size_t> K_list{10, 20, 30, 40, 50, 60};
    std::string constrained = "pinned";  // pinned | seed-only | none
    double alpha = 0.99;
    std::size_t k_nn = 50;
    double sigma = 0.0;  // <= 0: mean k-NN distance
};

struct SweepSpec {
    std::vector<std::size_t> injection_starts;
    std::size_t injection_duration = 0;
    std::vector<std::size_t> labels_per_class;
    std::size_t seeds = 20;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    SelectionSpec selection;
    FinetuneSpec finetune;
    PropagationSpec propagation;
    TrainConfig train;
    SweepSpec sweep;
    std::string out_dir = "run";
    std::uint64_t seed = 1;
    std::string config_hash;

    static ExperimentConfig from_table(const ConfigTable& t) {
        ExperimentConfig cfg;
        cfg.config_hash = t.hash();
        cfg.seed = static_cast<std::uint64_t>(t.get_int("seed", 1));
        cfg.out_dir = t.get_text("output.dir", "run");

        cfg.dataset.kind = t.get_text("dataset.kind", "moons");
        if (cfg.dataset.kind != "moons" && cfg.dataset.kind != "blobs" &&
            cfg.dataset.kind != "embedding")
            throw std::invalid_argument("dataset.kind must be moons, blobs, or embedding");
        cfg.dataset.n = static_cast<std::size_t>(t.get_int("dataset.n", 600));
        cfg.dataset.noise = t.get_real("dataset.noise", 0.1);
        cfg.dataset.classes = static_cast<std::size_t>(t.get_int("dataset.classes", 2));
        cfg.dataset.spread = t.get_real("dataset.spread", 1.0);
        cfg.dataset.test_fraction = t.get_real("dataset.test_fraction", 0.25);
        cfg.dataset.embedding_path = t.get_text("dataset.embedding_path", "");
        cfg.dataset.labels_path = t.get_text("dataset.labels_path", "");

        cfg.selection.method = parse_selection_method(t.get_text("selection.method", "active"));
        cfg.selection.m = static_cast<std::size_t>(t.get_int("selection.m", 10));
        cfg.selection.stratified = t.get_bool("selection.stratified", false);

        cfg.finetune.C = static_cast<std::size_t>(t.get_int("finetune.C", 6));
        cfg.finetune.K = static_cast<std::size_t>(t.get_int("finetune.K", 10));
        cfg.finetune.epochs = static_cast<std::size_t>(t.get_int("finetune.epochs", 40));
        cfg.finetune.learning_rate = t.get_real("finetune.learning_rate", 0.01);
        cfg.finetune.enabled = t.get_bool("finetune.enabled", true);

        cfg.propagation.mode = t.get_text("propagation.mode", "cluster");
        if (cfg.propagation.mode != "cluster" && cfg.propagation.mode != "llgc" &&
            cfg.propagation.mode != "oracle" && cfg.propagation.mode != "none")
            throw std::invalid_argument("propagation.mode must be cluster, llgc, oracle, or none");
        cfg.propagation.K_list.clear();
        for (long long k : t.get_int_array("propagation.K_list", {10, 20, 30, 40, 50, 60})) {
            if (k < 1) throw std::invalid_argument("propagation.K_list entries must be >= 1");
            cfg.propagation.K_list.push_back(static_cast<std::size_t>(k));
        }
        cfg.propagation.constrained = t.get_text("propagation.constrained", "pinned");
        if (cfg.propagation.constrained != "pinned" && cfg.propagation.constrained != "seed-only" &&
            cfg.propagation.constrained != "none")
            throw std::invalid_argument("propagation.constrained must be pinned, seed-only, or none");
        cfg.propagation.alpha = t.get_real("propagation.alpha", 0.99);
        cfg.propagation.k_nn = static_cast<std::size_t>(t.get_int("propagation.k_nn", 50));
        cfg.propagation.sigma = t.get_real("propagation.sigma", 0.0);

        cfg.train.lambda_u = t.get_real("train.lambda", 1.0);
        cfg.train.mu = static_cast<std::size_t>(t.get_int("train.mu", 7));
        cfg.train.batch_size = static_cast<std::size_t>(t.get_int("train.batch_size", 64));
        cfg.train.tau = t.get_real("train.tau", 0.95);
        cfg.train.T = static_cast<std::size_t>(t.get_int("train.T", 0));
        cfg.train.total_iters = static_cast<std::size_t>(t.get_int("train.total_iters", 200));
        cfg.train.lr = t.get_real("train.lr", 0.03);
        cfg.train.momentum = t.get_real("train.momentum", 0.9);
        const std::string mode = t.get_text("train.threshold_mode", "fixed");
        if (mode == "fixed")
            cfg.train.threshold_mode = ThresholdMode::fixed;
        else if (mode == "curriculum")
            cfg.train.threshold_mode = ThresholdMode::curriculum;
        else
            throw std::invalid_argument("train.threshold_mode must be fixed or curriculum");
        const std::string variant = t.get_text("train.curriculum_variant", "linear");
        if (variant == "linear")
            cfg.train.curriculum_variant = CurriculumVariant::linear;
        else if (variant == "warped")
            cfg.train.curriculum_variant = CurriculumVariant::warped;
        else
            throw std::invalid_argument("train.curriculum_variant must be linear or warped");
        cfg.train.sigma_weak = t.get_real("train.sigma_weak", -1.0);
        cfg.train.sigma_strong = t.get_real("train.sigma_strong", -1.0);
        cfg.train.hidden_dim = static_cast<std::size_t>(t.get_int("train.hidden", 64));
        cfg.train.log_interval = static_cast<std::size_t>(t.get_int("train.log_interval", 1));
        cfg.train.injection_start = static_cast<std::size_t>(t.get_int("train.injection_start", 0));
        cfg.train.injection_duration =
            static_cast<std::size_t>(t.get_int("train.injection_duration", 0));

        cfg.sweep.injection_duration =
            static_cast<std::size_t>(t.get_int("sweep.injection_duration", 0));
        for (long long s : t.get_int_array("sweep.injection_starts", {})) {
            if (s < 0) throw std::invalid_argument("sweep.injection_starts must be >= 0");
            cfg.sweep.injection_starts.push_back(static_cast<std::size_t>(s));
        }
        for (long long l : t.get_int_array("sweep.labels_per_class", {})) {
            if (l < 1) throw std::invalid_argument("sweep.labels_per_class entries must be >= 1");
            cfg.sweep.labels_per_class.push_back(static_cast<std::size_t>(l));
        }
        cfg.sweep.seeds = static_cast<std::size_t>(t.get_int("sweep.seeds", 20));
        return cfg;
    }

    static ExperimentConfig from_file(const std::string& path) {
        return from_table(ConfigTable::parse_file(path));
    }
};

}  // namespace priorssl

#endif
