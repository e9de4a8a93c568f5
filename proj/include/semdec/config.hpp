#pragma once

#include "adapt.hpp"
#include "error.hpp"
#include "latent_index.hpp"
#include "ridge.hpp"
#include "taxonomy.hpp"
#include "text.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

/**
 * @file config.hpp
 *
 * @brief Experiment configuration: a flat `key = value` file in TOML syntax.
 *
 * Supported values are quoted strings, numbers, true/false and one-line arrays
 * of numbers. Relative paths are resolved against the directory holding the
 * config file. Unknown keys are rejected.
 */

namespace semdec {

enum class AdaptTarget {
    true_train, ///< Moments of the true training features (stored in the model).
    pred_train  ///< Moments of the model's predictions on the training trials.
};

inline AdaptTarget parse_adapt_target(std::string_view s) {
    if (s == "true-train" || s == "true_train") {
        return AdaptTarget::true_train;
    }
    if (s == "pred-train" || s == "pred_train") {
        return AdaptTarget::pred_train;
    }
    throw ConfigError("unknown adaptation target '" + std::string(s) + "' (expected true-train or pred-train)");
}

inline std::string_view to_string(AdaptTarget t) { return t == AdaptTarget::true_train ? "true-train" : "pred-train"; }

inline adapt::Scope parse_adapt_scope(std::string_view s) {
    if (s == "feature" || s == "per-feature") {
        return adapt::Scope::per_feature;
    }
    if (s == "global") {
        return adapt::Scope::global;
    }
    throw ConfigError("unknown adaptation scope '" + std::string(s) + "' (expected feature or global)");
}

inline std::string_view to_string(adapt::Scope s) { return s == adapt::Scope::per_feature ? "feature" : "global"; }

enum class TaxonomyFormat { edges, wordnet };

struct ExperimentConfig {
    std::filesystem::path base_dir = ".";

    std::filesystem::path train_trials;
    std::filesystem::path train_features;
    std::filesystem::path test_trials;
    std::filesystem::path index;
    std::filesystem::path taxonomy;
    std::optional<std::filesystem::path> lemmas; ///< Edge-list lemma file or WordNet index.noun.
    TaxonomyFormat taxonomy_format = TaxonomyFormat::edges;
    std::filesystem::path events;
    std::filesystem::path model = "model.fmx";
    std::filesystem::path out_dir = "out";

    std::vector<double> lambda_grid = ridge::default_lambda_grid();
    double split_fraction = 0.9;
    std::uint64_t seed = 0;
    bool intercept = true;
    std::size_t hrf_shift = 1;

    std::optional<std::size_t> k;   ///< Falls back to the index sidecar.
    std::optional<Metric> metric;   ///< Falls back to the index sidecar.
    bool adapt = true;
    AdaptTarget adapt_target = AdaptTarget::true_train;
    adapt::Scope adapt_scope = adapt::Scope::per_feature;
    WupFormula wup_formula = WupFormula::standard;
    bool all_candidates = false;

    std::string subject = "subject";
    std::size_t threads = 0;

    void validate() const {
        if (k && *k < 1) {
            throw ConfigError("k must be at least 1");
        }
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
            throw ConfigError("split_fraction must lie in (0, 1)");
        }
    }
};

namespace detail {

using ConfigValue = std::variant<std::string, double, bool, std::vector<double>>;

inline ConfigValue parse_config_value(std::string_view raw, std::size_t ln, const std::string& src) {
    const auto v = text::trim(raw);
    if (v.empty()) {
        throw ParseError(src + ": missing value", ln);
    }
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            throw ParseError(src + ": unterminated string", ln);
        }
        return std::string(v.substr(1, v.size() - 2));
    }
    if (v == "true" || v == "false") {
        return v == "true";
    }
    if (v.front() == '[') {
        if (v.back() != ']') {
            throw ParseError(src + ": unterminated array", ln);
        }
        std::vector<double> out;
        const auto inner = text::trim(v.substr(1, v.size() - 2));
        if (!inner.empty()) {
            for (auto item : text::split(inner, ',')) {
                if (text::trim(item).empty()) {
                    continue;
                }
                const auto d = text::parse_double(item);
                if (!d) {
                    throw ParseError(src + ": array item '" + std::string(text::trim(item)) + "' is not a number", ln);
                }
                out.push_back(*d);
            }
        }
        return out;
    }
    const auto d = text::parse_double(v);
    if (!d) {
        throw ParseError(src + ": value '" + std::string(v) + "' is not a string, number, boolean or array", ln);
    }
    return *d;
}

inline std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

} // namespace detail

inline std::vector<double> parse_lambda_list(std::string_view s) {
    std::vector<double> out;
    for (auto item : text::split(s, ',')) {
        const auto d = text::parse_double(item);
        if (!d || *d < 0.0) {
            throw ConfigError("bad lambda '" + std::string(text::trim(item)) + "'");
        }
        out.push_back(*d);
    }
    return out;
}

inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir,
                                     const std::string& src = "<config>") {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    std::map<std::string, detail::ConfigValue> values;

    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const auto sv = text::trim(detail::strip_comment(text::strip_cr(line)));
        if (sv.empty()) {
            continue;
        }
        if (sv.front() == '[') {
            throw ParseError(src + ": tables are not supported", ln);
        }
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(src + ": expected key = value", ln);
        }
        const std::string key(text::trim(sv.substr(0, eq)));
        if (!values.emplace(key, detail::parse_config_value(sv.substr(eq + 1), ln, src)).second) {
            throw ParseError(src + ": duplicate key '" + key + "'", ln);
        }
    }

    auto str = [&](const std::string& key) -> const std::string& {
        const auto* s = std::get_if<std::string>(&values.at(key));
        if (!s) {
            throw ConfigError(src + ": '" + key + "' must be a string");
        }
        return *s;
    };
    auto num = [&](const std::string& key) {
        const auto* d = std::get_if<double>(&values.at(key));
        if (!d) {
            throw ConfigError(src + ": '" + key + "' must be a number");
        }
        return *d;
    };
    auto count = [&](const std::string& key) {
        const double d = num(key);
        if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d))) {
            throw ConfigError(src + ": '" + key + "' must be a non-negative integer");
        }
        return static_cast<std::uint64_t>(d);
    };
    auto flag = [&](const std::string& key) {
        const auto* b = std::get_if<bool>(&values.at(key));
        if (!b) {
            throw ConfigError(src + ": '" + key + "' must be true or false");
        }
        return *b;
    };
    auto path = [&](const std::string& key) { return base_dir / str(key); };

    for (const auto& [key, _] : values) {
        if (key == "train_trials") {
            cfg.train_trials = path(key);
        } else if (key == "train_features") {
            cfg.train_features = path(key);
        } else if (key == "test_trials") {
            cfg.test_trials = path(key);
        } else if (key == "index") {
            cfg.index = path(key);
        } else if (key == "taxonomy") {
            cfg.taxonomy = path(key);
        } else if (key == "lemmas") {
            cfg.lemmas = path(key);
        } else if (key == "taxonomy_format") {
            const auto& f = str(key);
            if (f == "edges") {
                cfg.taxonomy_format = TaxonomyFormat::edges;
            } else if (f == "wordnet") {
                cfg.taxonomy_format = TaxonomyFormat::wordnet;
            } else {
                throw ConfigError(src + ": taxonomy_format must be edges or wordnet");
            }
        } else if (key == "events") {
            cfg.events = path(key);
        } else if (key == "model") {
            cfg.model = path(key);
        } else if (key == "out_dir") {
            cfg.out_dir = path(key);
        } else if (key == "lambda_grid") {
            const auto* v = std::get_if<std::vector<double>>(&values.at(key));
            if (!v) {
                throw ConfigError(src + ": lambda_grid must be an array");
            }
            cfg.lambda_grid = *v;
        } else if (key == "split_fraction") {
            cfg.split_fraction = num(key);
        } else if (key == "seed") {
            cfg.seed = count(key);
        } else if (key == "intercept") {
            cfg.intercept = flag(key);
        } else if (key == "hrf_shift") {
            cfg.hrf_shift = count(key);
        } else if (key == "k") {
            cfg.k = count(key);
        } else if (key == "metric") {
            cfg.metric = parse_metric(str(key));
        } else if (key == "adapt") {
            cfg.adapt = flag(key);
        } else if (key == "adapt_target") {
            cfg.adapt_target = parse_adapt_target(str(key));
        } else if (key == "adapt_scope") {
            cfg.adapt_scope = parse_adapt_scope(str(key));
        } else if (key == "wup_formula") {
            cfg.wup_formula = parse_wup_formula(str(key));
        } else if (key == "all_candidates") {
            cfg.all_candidates = flag(key);
        } else if (key == "subject") {
            cfg.subject = str(key);
        } else if (key == "threads") {
            cfg.threads = count(key);
        } else {
            throw ConfigError(src + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config " + file.string());
    }
    return parse_config(in, file.parent_path().empty() ? "." : file.parent_path(), file.string());
}

inline std::string format_config(const ExperimentConfig& c, const std::filesystem::path& base_dir) {
    auto rel = [&](const std::filesystem::path& p) {
        return "\"" + std::filesystem::path(p).lexically_relative(base_dir).generic_string() + "\"";
    };
    std::ostringstream out;
    out << "# semdec experiment\n";
    out << "subject = \"" << c.subject << "\"\n";
    out << "train_trials = " << rel(c.train_trials) << "\n";
    out << "train_features = " << rel(c.train_features) << "\n";
    out << "test_trials = " << rel(c.test_trials) << "\n";
    out << "index = " << rel(c.index) << "\n";
    out << "taxonomy = " << rel(c.taxonomy) << "\n";
    out << "taxonomy_format = \"" << (c.taxonomy_format == TaxonomyFormat::edges ? "edges" : "wordnet") << "\"\n";
    if (c.lemmas) {
        out << "lemmas = " << rel(*c.lemmas) << "\n";
    }
    if (!c.events.empty()) {
        out << "events = " << rel(c.events) << "\n";
    }
    out << "model = " << rel(c.model) << "\n";
    out << "out_dir = " << rel(c.out_dir) << "\n";
    out << "lambda_grid = [";
    for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) {
        out << (i ? ", " : "") << text::format_double(c.lambda_grid[i]);
    }
    out << "]\n";
    out << "split_fraction = " << text::format_double(c.split_fraction) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "intercept = " << (c.intercept ? "true" : "false") << "\n";
    out << "hrf_shift = " << c.hrf_shift << "\n";
    if (c.k) {
        out << "k = " << *c.k << "\n";
    }
    if (c.metric) {
        out << "metric = \"" << to_string(*c.metric) << "\"\n";
    }
    out << "adapt = " << (c.adapt ? "true" : "false") << "\n";
    out << "adapt_target = \"" << to_string(c.adapt_target) << "\"\n";
    out << "adapt_scope = \"" << to_string(c.adapt_scope) << "\"\n";
    out << "wup_formula = \"" << (c.wup_formula == WupFormula::standard ? "standard" : "paper") << "\"\n";
    return out.str();
}

} // namespace semdec
