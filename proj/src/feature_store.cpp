#include "ssr/feature_store.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ssr/csv.hpp"

namespace ssr::store {

using nlohmann::json;
using preprocess::JoinedSample;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: break;
    }
    return "test";
}

std::string_view to_string(Stream s) { return s == Stream::Regression ? "regression" : "labeling"; }

std::string bucket_file(Split split, Stream stream, std::size_t n_steps) {
    return std::string(to_string(split)) + "_" + std::string(to_string(stream)) + "_n" + std::to_string(n_steps) +
           ".csv";
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

json Manifest::to_json() const {
    json groups_j = json::array();
    for (const auto& [key, g] : groups) groups_j.push_back({key.kqi, key.mtype, key.stage, g.b1, g.b2});
    json buckets_j = json::object();
    for (const auto& [name, counts] : buckets) {
        json c = json::object();
        for (auto [n, count] : counts) c[std::to_string(n)] = count;
        buckets_j[name] = c;
    }
    const auto& tf = transforms;
    return {{"format", "ssr-features-1"},
            {"sensor_width", sensor_width},
            {"meas_width", meas_width},
            {"monitor_marker", monitor_marker},
            {"swap_streams", swap_streams},
            {"numeric_names", tf.numeric_names},
            {"kept", tf.kept},
            {"scaler_min", tf.scaler.min},
            {"scaler_max", tf.scaler.max},
            {"imputer_median", tf.imputer.median},
            {"sensor_vocab", tf.sensor_vocab.labels},
            {"meas_vocab", tf.meas_vocab.labels},
            {"groups", groups_j},
            {"buckets", buckets_j}};
}

Manifest Manifest::from_json(const json& j) {
    if (j.value("format", "") != "ssr-features-1") throw std::runtime_error("not a feature manifest");
    Manifest m;
    m.sensor_width = j.at("sensor_width").get<std::size_t>();
    m.meas_width = j.at("meas_width").get<std::size_t>();
    m.monitor_marker = j.at("monitor_marker").get<std::string>();
    m.swap_streams = j.at("swap_streams").get<bool>();
    auto& tf = m.transforms;
    tf.numeric_names = j.at("numeric_names").get<std::vector<std::string>>();
    tf.kept = j.at("kept").get<std::vector<std::size_t>>();
    tf.scaler.min = j.at("scaler_min").get<std::vector<double>>();
    tf.scaler.max = j.at("scaler_max").get<std::vector<double>>();
    tf.imputer.median = j.at("imputer_median").get<std::vector<double>>();
    tf.sensor_vocab.labels = j.at("sensor_vocab").get<std::vector<std::vector<std::string>>>();
    tf.meas_vocab.labels = j.at("meas_vocab").get<std::vector<std::vector<std::string>>>();
    for (const auto& g : j.at("groups")) {
        GroupKey key{g.at(0).get<std::string>(), g.at(1).get<std::string>(), g.at(2).get<std::string>()};
        m.groups[key] = {key, g.at(3).get<double>(), g.at(4).get<double>()};
    }
    for (const auto& [name, counts] : j.at("buckets").items())
        for (const auto& [n, count] : counts.items())
            m.buckets[name][std::stoul(n)] = count.get<std::size_t>();
    return m;
}

std::string Manifest::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
}

namespace {

const std::vector<std::string> kMetaColumns{"processing_id", "product_id", "kqi",      "type",     "stage",
                                            "n_steps",       "target",     "passfail", "inspection", "lcl",
                                            "ucl",           "limit_source"};

std::string bucket_key(Split split, Stream stream) {
    return std::string(to_string(split)) + "/" + std::string(to_string(stream));
}

}  // namespace

void write_samples_csv(const std::filesystem::path& path, const std::vector<JoinedSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::vector<std::string> header = kMetaColumns;
    const std::size_t width = samples.empty() ? 0 : samples.front().features.size();
    for (std::size_t i = 0; i < width; ++i) header.push_back("f" + std::to_string(i));
    write_csv_row(out, header);
    std::vector<std::string> row;
    for (const auto& s : samples) {
        if (s.features.size() != width) throw std::invalid_argument("mixed feature widths in one bucket file");
        row = {s.id.processing_id,
               s.id.product_id,
               s.key.kqi,
               s.key.mtype,
               s.key.stage,
               std::to_string(s.n_steps),
               format_double(s.target),
               std::string(ssr::to_string(s.passfail)),
               std::string(ssr::to_string(s.inspection)),
               s.limits ? format_double(s.limits->lcl) : "",
               s.limits ? format_double(s.limits->ucl) : "",
               s.limits ? std::string(ssr::to_string(s.limits->source)) : ""};
        for (double f : s.features) row.push_back(format_double(f));
        write_csv_row(out, row);
    }
}

std::vector<JoinedSample> read_samples_csv(const std::filesystem::path& path) {
    auto t = load_table(path, kMetaColumns);
    const std::size_t n_meta = kMetaColumns.size();
    std::vector<JoinedSample> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        JoinedSample s;
        s.id = {row[0], row[1]};
        s.key = {row[2], row[3], row[4]};
        s.n_steps = std::stoul(row[5]);
        s.target = parse_double(row[6]).value();
        s.passfail = parse_passfail(row[7]);
        s.inspection = parse_inspection(row[8]);
        if (!row[9].empty())
            s.limits = ControlLimits(parse_double(row[9]).value(), parse_double(row[10]).value(),
                                     parse_limit_source(row[11]));
        s.features.reserve(row.size() - n_meta);
        for (std::size_t i = n_meta; i < row.size(); ++i) s.features.push_back(parse_double(row[i]).value());
        out.push_back(std::move(s));
    }
    return out;
}

Manifest write_features(const std::filesystem::path& dir, const preprocess::PreprocessResult& result,
                        const preprocess::PreprocessConfig& cfg) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m.sensor_width = result.transforms.sensor_width();
    m.meas_width = result.transforms.meas_width();
    m.monitor_marker = cfg.monitor_marker;
    m.swap_streams = cfg.swap_streams;
    m.transforms = result.transforms;
    m.groups = result.groups;

    auto emit = [&](Split split, Stream stream, const std::vector<JoinedSample>& samples) {
        std::map<std::size_t, std::vector<JoinedSample>> by_steps;
        for (const auto& s : samples) by_steps[s.n_steps].push_back(s);
        auto& counts = m.buckets[bucket_key(split, stream)];
        for (const auto& [n, bucket] : by_steps) {
            write_samples_csv(dir / bucket_file(split, stream, n), bucket);
            counts[n] = bucket.size();
        }
    };
    emit(Split::Train, Stream::Regression, result.regression.train);
    emit(Split::Val, Stream::Regression, result.regression.val);
    emit(Split::Test, Stream::Regression, result.regression.test);
    emit(Split::Train, Stream::Labeling, result.labeling.train);
    emit(Split::Val, Stream::Labeling, result.labeling.val);
    emit(Split::Test, Stream::Labeling, result.labeling.test);

    normgroups::write_groups_csv(dir / kGroupsFile, m.groups);
    auto j = m.to_json();
    j["hash"] = m.hash();
    std::ofstream out(dir / kManifestFile, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(1) << '\n';
    return m;
}

Manifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestFile, std::ios::binary);
    if (!in) throw std::runtime_error("no " + std::string(kManifestFile) + " in " + dir.string());
    auto j = json::parse(in);
    auto m = Manifest::from_json(j);
    if (j.contains("hash") && j["hash"].get<std::string>() != m.hash())
        throw std::runtime_error("manifest hash does not match its contents in " + dir.string());
    return m;
}

std::vector<JoinedSample> read_samples(const std::filesystem::path& dir, const Manifest& manifest, Split split,
                                       Stream stream) {
    std::vector<JoinedSample> out;
    auto it = manifest.buckets.find(bucket_key(split, stream));
    if (it == manifest.buckets.end()) return out;
    for (const auto& [n, count] : it->second) {
        auto bucket = read_samples_csv(dir / bucket_file(split, stream, n));
        if (bucket.size() != count)
            throw std::runtime_error(bucket_file(split, stream, n) + ": expected " + std::to_string(count) +
                                     " samples, found " + std::to_string(bucket.size()));
        for (auto& s : bucket) {
            if (s.features.size() != n * manifest.sensor_width + manifest.meas_width)
                throw std::runtime_error(bucket_file(split, stream, n) + ": feature width mismatch");
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace ssr::store
