#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "setrec/errors.hpp"
#include "setrec/models.hpp"

namespace setrec {

enum class TaskKind { citation, labels };

struct OnlyFilter {
    std::string model;
    int k = 0;
    double f = 0.0;
    int run = 0;
};

/// Flat key=value experiment description; lists are comma separated.
/// Command-line flags override file values.
struct ExperimentConfig {
    std::string corpus;
    TaskKind task = TaskKind::citation;
    std::optional<int> split_year;       // split = year:T
    std::optional<double> split_ratio;   // split = random:RATIO
    std::vector<int> pruning{1};
    std::vector<double> drop{0.5};
    std::vector<ModelKind> models{ModelKind::cooc};
    std::vector<std::string> condition_sets{"none"};  // none | title | all | a+b
    int runs = 3;
    std::uint64_t seed = 42;
    std::string out = "results";
    bool mask_observed = true;
    int jobs = 1;
    Hyperparams hp;
    std::size_t word_dim = 50;
    std::size_t author_dim = 32;
    std::optional<std::string> embedding_file;
    std::optional<OnlyFilter> only;
    std::string dataset_name = "corpus";
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) {
        part = trim(part);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

inline int parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects an integer, got \"" + s + "\"");
    }
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects a number, got \"" + s + "\"");
    }
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
    if (s == "off" || s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: " + key + " expects on/off, got \"" + s + "\"");
}

}  // namespace detail

inline std::optional<Block> block_from_name(const std::string& s) {
    for (Block b : {Block::title, Block::author, Block::venue, Block::labels})
        if (s == block_name(b)) return b;
    return std::nullopt;
}

/// "model:k:f:run", e.g. "cooc:1:0.5:2".
inline OnlyFilter parse_only(const std::string& s) {
    auto parts = detail::split_list(s, ':');
    if (parts.size() != 4) throw ConfigError("--only expects model:k:f:run, got \"" + s + "\"");
    OnlyFilter o;
    if (!kind_from_name(parts[0])) throw ConfigError("--only: unknown model \"" + parts[0] + "\"");
    o.model = parts[0];
    o.k = detail::parse_int(parts[1], "--only k");
    o.f = detail::parse_double(parts[2], "--only f");
    o.run = detail::parse_int(parts[3], "--only run");
    return o;
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    if (key == "corpus") {
        cfg.corpus = value;
    } else if (key == "task") {
        if (value == "citation") cfg.task = TaskKind::citation;
        else if (value == "labels") cfg.task = TaskKind::labels;
        else throw ConfigError("config: task must be citation or labels, got \"" + value + "\"");
    } else if (key == "split") {
        auto colon = value.find(':');
        if (colon == std::string::npos) throw ConfigError("config: split expects year:T or random:RATIO");
        const std::string mode = value.substr(0, colon);
        const std::string arg = value.substr(colon + 1);
        if (mode == "year") {
            cfg.split_year = parse_int(arg, "split year");
            cfg.split_ratio.reset();
        } else if (mode == "random") {
            cfg.split_ratio = parse_double(arg, "split ratio");
            cfg.split_year.reset();
        } else {
            throw ConfigError("config: split mode must be year or random, got \"" + mode + "\"");
        }
    } else if (key == "pruning") {
        cfg.pruning.clear();
        for (const auto& p : detail::split_list(value)) cfg.pruning.push_back(parse_int(p, "pruning"));
    } else if (key == "drop") {
        cfg.drop.clear();
        for (const auto& p : detail::split_list(value)) cfg.drop.push_back(parse_double(p, "drop"));
    } else if (key == "models") {
        cfg.models.clear();
        for (const auto& p : detail::split_list(value)) {
            auto k = kind_from_name(p);
            if (!k) throw ConfigError("config: unknown model \"" + p + "\"");
            cfg.models.push_back(*k);
        }
    } else if (key == "conditions") {
        cfg.condition_sets = detail::split_list(value);
    } else if (key == "runs") {
        cfg.runs = parse_int(value, key);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
    } else if (key == "out") {
        cfg.out = value;
    } else if (key == "mask_observed") {
        cfg.mask_observed = parse_bool(value, key);
    } else if (key == "jobs") {
        cfg.jobs = parse_int(value, key);
    } else if (key == "dataset_name") {
        cfg.dataset_name = value;
    } else if (key == "epochs") {
        cfg.hp.epochs = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "batch") {
        cfg.hp.batch = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "hidden") {
        cfg.hp.hidden = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "code") {
        cfg.hp.code = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "lr") {
        cfg.hp.lr = parse_double(value, key);
    } else if (key == "dropout") {
        cfg.hp.dropout_p = parse_double(value, key);
    } else if (key == "dae_noise") {
        cfg.hp.dae_noise = parse_double(value, key);
    } else if (key == "svd_rank") {
        cfg.hp.svd_rank = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "kl_weight") {
        cfg.hp.kl_weight = parse_double(value, key);
    } else if (key == "aae_literal_sign") {
        cfg.hp.aae_literal_sign = parse_bool(value, key);
    } else if (key == "word_dim") {
        cfg.word_dim = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "author_dim") {
        cfg.author_dim = static_cast<std::size_t>(parse_int(value, key));
    } else if (key == "embedding_file") {
        cfg.embedding_file = value;
    } else {
        throw ConfigError("config: unknown key \"" + key + "\"");
    }
}

/// Relative corpus/embedding/output paths resolve against the config file's
/// directory, so a config works from any working directory.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&base](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
    };
    resolve(cfg.corpus);
    resolve(cfg.out);
    if (cfg.embedding_file) resolve(*cfg.embedding_file);
    return cfg;
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.corpus.empty()) throw ConfigError("config: corpus path is required");
    if (!cfg.split_year && !cfg.split_ratio) throw ConfigError("config: split = year:T or random:RATIO is required");
    if (cfg.split_ratio && !(*cfg.split_ratio > 0.0 && *cfg.split_ratio < 1.0))
        throw ConfigError("config: random split ratio must be in (0,1)");
    if (cfg.pruning.empty()) throw ConfigError("config: pruning list is empty");
    for (int k : cfg.pruning)
        if (k < 0) throw ConfigError("config: pruning thresholds must be >= 0");
    if (cfg.drop.empty()) throw ConfigError("config: drop list is empty");
    for (double f : cfg.drop)
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("config: drop fractions must be in (0,1)");
    if (cfg.models.empty()) throw ConfigError("config: models list is empty");
    if (cfg.condition_sets.empty()) throw ConfigError("config: conditions list is empty");
    if (cfg.runs < 1) throw ConfigError("config: runs must be >= 1");
    if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    cfg.hp.validate();
}

}  // namespace setrec
