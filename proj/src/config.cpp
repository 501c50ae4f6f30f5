#include "ssr/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ssr/csv.hpp"

namespace ssr {

bool KeyFilter::matches(const GroupKey& key) const {
    return (!kqi || *kqi == key.kqi) && (!mtype || *mtype == key.mtype) && (!stage || *stage == key.stage);
}

std::string KeyFilter::str() const {
    std::string s;
    auto add = [&](const char* name, const std::optional<std::string>& v) {
        if (!v) return;
        if (!s.empty()) s += ",";
        s += std::string(name) + "=" + *v;
    };
    add("kqi", kqi);
    add("type", mtype);
    add("stage", stage);
    return s;
}

KeyFilter KeyFilter::parse(const std::string& text) {
    KeyFilter f;
    if (trim(text).empty()) return f;
    for (const auto& part : split(text, ',')) {
        auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("filter term '" + part + "' is not field=value");
        auto field = trim(part.substr(0, eq));
        auto value = trim(part.substr(eq + 1));
        if (value.empty()) throw ConfigError("filter term '" + part + "' has an empty value");
        if (field == "kqi")
            f.kqi = value;
        else if (field == "type")
            f.mtype = value;
        else if (field == "stage")
            f.stage = value;
        else
            throw ConfigError("unknown filter field '" + field + "' (expected kqi, type or stage)");
    }
    return f;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) {
        auto t = trim(part);
        if (t.empty()) continue;
        try {
            out.push_back(parse_double(t).value());
        } catch (const CsvError&) {
            throw ConfigError("not a number: '" + t + "'");
        }
    }
    return out;
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        T out;
        if constexpr (std::is_floating_point_v<T>)
            out = static_cast<T>(std::stod(v, &pos));
        else {
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            out = static_cast<T>(std::stoull(v, &pos));
        }
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid value '" + v + "' for " + key);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean '" + v + "' for " + key);
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& part : split(v, ','))
        if (!trim(part).empty()) out.push_back(parse_number<std::size_t>(key, trim(part)));
    return out;
}

std::vector<std::string> parse_name_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& part : split(v, ','))
        if (!trim(part).empty()) out.push_back(trim(part));
    return out;
}

#define SIZE_KEY(key, field) [](RunConfig& c, const std::string& v) { c.field = parse_number<std::size_t>(key, v); }
#define REAL_KEY(key, field) [](RunConfig& c, const std::string& v) { c.field = parse_number<double>(key, v); }
#define SEED_KEY(key, field) [](RunConfig& c, const std::string& v) { c.field = parse_number<std::uint64_t>(key, v); }

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"paths.data_dir", [](RunConfig& c, const std::string& v) { c.paths.data_dir = v; }},
        {"paths.features_dir", [](RunConfig& c, const std::string& v) { c.paths.features_dir = v; }},
        {"paths.model_dir", [](RunConfig& c, const std::string& v) { c.paths.model_dir = v; }},
        {"paths.report_dir", [](RunConfig& c, const std::string& v) { c.paths.report_dir = v; }},

        {"synth.n_wafers",
         [](RunConfig& c, const std::string& v) {
             c.synth.n_wafers = parse_number<std::size_t>("synth.n_wafers", v);
             c.synth_n_wafers_set = true;
         }},
        {"synth.step_weights", [](RunConfig& c, const std::string& v) { c.synth.step_weights = parse_double_list(v); }},
        {"synth.n_numeric_sensors", SIZE_KEY("synth.n_numeric_sensors", synth.n_numeric_sensors)},
        {"synth.sensor_cat_vocab",
         [](RunConfig& c, const std::string& v) { c.synth.sensor_cat_vocab = parse_size_list("synth.sensor_cat_vocab", v); }},
        {"synth.n_kqi", SIZE_KEY("synth.n_kqi", synth.n_kqi)},
        {"synth.n_type", SIZE_KEY("synth.n_type", synth.n_type)},
        {"synth.n_stage", SIZE_KEY("synth.n_stage", synth.n_stage)},
        {"synth.n_equip", SIZE_KEY("synth.n_equip", synth.n_equip)},
        {"synth.n_prod", SIZE_KEY("synth.n_prod", synth.n_prod)},
        {"synth.max_batch_wafers", SIZE_KEY("synth.max_batch_wafers", synth.max_batch_wafers)},
        {"synth.max_keys_per_batch", SIZE_KEY("synth.max_keys_per_batch", synth.max_keys_per_batch)},
        {"synth.noise_sd", REAL_KEY("synth.noise_sd", synth.noise_sd)},
        {"synth.jitter_sd", REAL_KEY("synth.jitter_sd", synth.jitter_sd)},
        {"synth.rel_spread", REAL_KEY("synth.rel_spread", synth.rel_spread)},
        {"synth.fail_rate", REAL_KEY("synth.fail_rate", synth.fail_rate)},
        {"synth.missing_rate", REAL_KEY("synth.missing_rate", synth.missing_rate)},
        {"synth.duplicate_rate", REAL_KEY("synth.duplicate_rate", synth.duplicate_rate)},
        {"synth.targ_fraction", REAL_KEY("synth.targ_fraction", synth.targ_fraction)},
        {"synth.seed", SEED_KEY("synth.seed", synth.seed)},

        {"schema.numeric_columns",
         [](RunConfig& c, const std::string& v) { c.schema.numeric_columns = parse_name_list(v); }},
        {"schema.categorical_columns",
         [](RunConfig& c, const std::string& v) { c.schema.categorical_columns = parse_name_list(v); }},

        {"preprocess.monitor_marker",
         [](RunConfig& c, const std::string& v) {
             if (v.empty()) throw ConfigError("preprocess.monitor_marker must be non-empty");
             c.preprocess.monitor_marker = v;
             c.synth.monitor_marker = v;
         }},
        {"preprocess.swap_streams",
         [](RunConfig& c, const std::string& v) { c.preprocess.swap_streams = parse_bool("preprocess.swap_streams", v); }},
        {"preprocess.seed", SEED_KEY("preprocess.seed", preprocess.seed)},

        {"model.arch",
         [](RunConfig& c, const std::string& v) {
             if (v != "small" && v != "large" && v != "custom")
                 throw ConfigError("model.arch must be small, large or custom");
             c.model.arch = v;
         }},
        {"model.d", SIZE_KEY("model.d", model.d)},
        {"model.mlp_hidden", SIZE_KEY("model.mlp_hidden", model.mlp_hidden)},
        {"model.mlp_layers", SIZE_KEY("model.mlp_layers", model.mlp_layers)},

        {"train.loss",
         [](RunConfig& c, const std::string& v) {
             try {
                 c.train.loss = train::parse_loss(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(std::string("train.loss: ") + e.what());
             }
         }},
        {"train.learning_rate", REAL_KEY("train.learning_rate", train.adam.learning_rate)},
        {"train.beta1", REAL_KEY("train.beta1", train.adam.beta1)},
        {"train.beta2", REAL_KEY("train.beta2", train.adam.beta2)},
        {"train.eps", REAL_KEY("train.eps", train.adam.eps)},
        {"train.batch_size", SIZE_KEY("train.batch_size", train.batch_size)},
        {"train.patience", SIZE_KEY("train.patience", train.patience)},
        {"train.max_epochs", SIZE_KEY("train.max_epochs", train.max_epochs)},
        {"train.seed", SEED_KEY("train.seed", train.seed)},
        {"train.re_c", REAL_KEY("train.re_c", train.re.c)},
        {"train.filter", [](RunConfig& c, const std::string& v) { c.train_filter = KeyFilter::parse(v); }},

        {"eval.f_grid", [](RunConfig& c, const std::string& v) { c.eval.f_grid = parse_double_list(v); }},
        {"eval.test_filter", [](RunConfig& c, const std::string& v) { c.eval.test_filter = KeyFilter::parse(v); }},
    };
    return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef SEED_KEY

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    RunConfig cfg;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' must be inside a [section]");
        for (const auto& [key, value] : body) {
            auto full = section + "." + key;
            auto it = table.find(full);
            if (it == table.end()) throw ConfigError("unknown config key '" + full + "'");
            it->second(cfg, trim(value.data()));
        }
    }
    if (cfg.schema.numeric_columns.empty() && cfg.schema.categorical_columns.empty())
        cfg.schema = cfg.synth.schema();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

preprocess::PreprocessConfig RunConfig::preprocess_config() const {
    return {schema, preprocess.monitor_marker, preprocess.swap_streams, preprocess.seed};
}

nn::ArchConfig RunConfig::arch(std::size_t S, std::size_t M) const {
    if (model.arch == "small") return nn::ArchConfig::small(S, M);
    if (model.arch == "large") return nn::ArchConfig::large(S, M);
    return {S, M, model.d, model.mlp_hidden, model.mlp_layers};
}

}  // namespace ssr
