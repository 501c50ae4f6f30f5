#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssr/preprocess.hpp"

namespace ssr::store {

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kGroupsFile = "groups.csv";

enum class Split { Train, Val, Test };
enum class Stream { Regression, Labeling };

std::string_view to_string(Split s);
std::string_view to_string(Stream s);

/// Bucket file name, e.g. "train_regression_n2.csv".
std::string bucket_file(Split split, Stream stream, std::size_t n_steps);

/// Self-description of a preprocessed feature directory.
struct Manifest {
    std::size_t sensor_width = 0;
    std::size_t meas_width = 0;
    std::string monitor_marker;
    bool swap_streams = false;
    preprocess::FittedTransforms transforms;
    normgroups::GroupTable groups;
    /// (split, stream) -> n_steps -> sample count
    std::map<std::string, std::map<std::size_t, std::size_t>> buckets;

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
    /// 16 hex digits of FNV-1a over the canonical JSON text.
    std::string hash() const;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Writes one CSV per (split, stream, n_steps), groups.csv, and manifest.json.
Manifest write_features(const std::filesystem::path& dir, const preprocess::PreprocessResult& result,
                        const preprocess::PreprocessConfig& cfg);

Manifest read_manifest(const std::filesystem::path& dir);

/// Reads every bucket of one (split, stream), ascending in n_steps.
std::vector<preprocess::JoinedSample> read_samples(const std::filesystem::path& dir, const Manifest& manifest,
                                                   Split split, Stream stream);

void write_samples_csv(const std::filesystem::path& path, const std::vector<preprocess::JoinedSample>& samples);
std::vector<preprocess::JoinedSample> read_samples_csv(const std::filesystem::path& path);

}  // namespace ssr::store
