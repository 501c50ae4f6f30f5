#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssr/csv.hpp"
#include "ssr/ingest.hpp"

namespace ssr::synth {

/// Knobs of the synthetic sensor/metrology generator.
///
/// Ground truth: wafers are processed in batches sharing a processing id.
/// Each batch draws a latent standard-normal vector u_t per step; every wafer
/// in the batch sees u_t plus N(0, jitter_sd^2) jitter, and its numeric
/// sensor j reads mu_j + sigma_j * u_tj. The sequence signal of a wafer is
///
///     z = sum_t w_t (a . u_t) / sqrt(sum_t w_t^2),  w_t = 1, last step 2,
///
/// with `a` a fixed random unit vector, so z ~ N(0, 1). For a measurement
/// key g = (kqi, type, stage) the clean value is m_g + s_g z, where m_g is
/// a base plus per-kqi, per-type and per-stage offsets and s_g = rel_spread
/// m_g. Control limits are m_g -/+ q s_g with q chosen so that
/// P(|z| > q) = fail_rate. The monitor wafer of a batch is measured
/// (meas_med = clean + N(0, noise_sd^2)) and the product wafers inherit its
/// value under the non-monitor KQI label.
struct SynthConfig {
    std::size_t n_wafers = 1000;
    std::vector<double> step_weights{0.1, 0.4, 0.3, 0.1, 0.1};  ///< P(n_steps = 1..5)
    std::size_t n_numeric_sensors = 24;
    std::vector<std::size_t> sensor_cat_vocab{5, 5};
    std::size_t n_kqi = 3;
    std::size_t n_type = 2;
    std::size_t n_stage = 2;
    std::size_t n_equip = 3;
    std::size_t n_prod = 2;
    std::size_t max_batch_wafers = 4;  ///< monitor + up to this many - 1 product wafers
    std::size_t max_keys_per_batch = 3;
    double noise_sd = 0.05;
    double jitter_sd = 0.05;
    double rel_spread = 0.05;
    double fail_rate = 0.02;
    double missing_rate = 0.01;
    double duplicate_rate = 0.01;
    double targ_fraction = 0.5;  ///< rows carrying targ_min/targ_max
    std::string monitor_marker = "MON";
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;

    std::vector<std::string> numeric_columns() const;
    std::vector<std::string> categorical_columns() const;
    ingest::SensorSchema schema() const { return {numeric_columns(), categorical_columns()}; }
};

struct SynthOutput {
    RawTable sensor;
    RawTable metrology;
    RawTable limits;
    nlohmann::json manifest;  ///< every ground-truth coefficient
};

SynthOutput generate(const SynthConfig& cfg);

inline constexpr const char* kSensorFile = "sensor.csv";
inline constexpr const char* kMetrologyFile = "metrology.csv";
inline constexpr const char* kLimitsFile = "limits.csv";
inline constexpr const char* kTruthFile = "truth_manifest.json";

/// Writes the three CSVs and the manifest into `dir`.
void write_output(const std::filesystem::path& dir, const SynthOutput& out);

/// z for a sequence of standardized step vectors, per the documented formula.
double sequence_signal(const std::vector<std::vector<double>>& standardized_steps, const std::vector<double>& direction);

/// Two-sided standard normal quantile: q with P(|Z| > q) = p.
double two_sided_normal_quantile(double p);

}  // namespace ssr::synth
