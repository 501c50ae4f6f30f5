#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssr/domain.hpp"
#include "ssr/ingest.hpp"
#include "ssr/preprocess.hpp"
#include "ssr/synthgen.hpp"
#include "ssr/train.hpp"

namespace ssr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Selects samples by (canonical) kqi, type and stage; unset fields match anything.
struct KeyFilter {
    std::optional<std::string> kqi;
    std::optional<std::string> mtype;
    std::optional<std::string> stage;

    bool empty() const { return !kqi && !mtype && !stage; }
    bool matches(const GroupKey& key) const;
    std::string str() const;

    /// Parses "kqi=K1,type=T1[,stage=S1]". Empty text gives an empty filter.
    static KeyFilter parse(const std::string& text);
};

/// Everything the CLI needs, read from an INI-style file:
///
///   # comment
///   [section]
///   key = value
///
/// Unknown sections or keys are rejected. See README for the key table.
struct RunConfig {
    struct Paths {
        std::filesystem::path data_dir = "data";
        std::filesystem::path features_dir = "features";
        std::filesystem::path model_dir = "model";
        std::filesystem::path report_dir = "report";
    } paths;

    synth::SynthConfig synth;
    bool synth_n_wafers_set = false;

    ingest::SensorSchema schema;  ///< defaults to the generator's column names

    struct Preprocess {
        std::string monitor_marker = "MON";
        bool swap_streams = false;
        std::uint64_t seed = 0;
    } preprocess;

    struct Model {
        std::string arch = "small";  ///< small | large | custom
        std::size_t d = 128;
        std::size_t mlp_hidden = 256;
        std::size_t mlp_layers = 2;
    } model;

    train::TrainConfig train;
    KeyFilter train_filter;

    struct Eval {
        std::vector<double> f_grid = {0.0, 0.1, 0.2, 0.3, 0.35, 0.4};
        KeyFilter test_filter;
    } eval;

    /// Throws ConfigError naming the offending key.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text);

    preprocess::PreprocessConfig preprocess_config() const;
    /// Architecture for the given sensor/measurement widths.
    nn::ArchConfig arch(std::size_t sensor_dim, std::size_t meas_dim) const;
};

/// Comma-separated doubles.
std::vector<double> parse_double_list(const std::string& text);

}  // namespace ssr
