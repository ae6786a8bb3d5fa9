#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/error.hpp"
#include "foilgen/geometry.hpp"
#include "foilgen/text.hpp"

namespace foilgen {

/// Normalized airfoils on the cosine grid plus the shared scale coefficient.
struct Dataset {
    std::vector<std::string> names;
    Eigen::MatrixXd rows;  // size() x 200, entries in [-1, 1]
    double scale = 1.0;
    std::size_t m = kSurfacePoints;

    std::size_t size() const { return names.size(); }

    std::size_t index_of(const std::string& name) const {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error(Errc::UnknownAirfoil, "no airfoil named '" + name + "' in dataset");
        return static_cast<std::size_t>(it - names.begin());
    }
};

inline constexpr const char* kDatasetMagic = "# foilgen-dataset v1";

inline std::string dataset_to_string(const Dataset& d) {
    std::string out = kDatasetMagic;
    out += " m=" + std::to_string(d.m) + " N=" + std::to_string(2 * d.m) + " scale=" + text::format_double(d.scale) + "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        out += text::csv_field(d.names[i]);
        for (Eigen::Index j = 0; j < d.rows.cols(); ++j) {
            out += ',';
            out += text::format_double(d.rows(static_cast<Eigen::Index>(i), j));
        }
        out += '\n';
    }
    return out;
}

inline Dataset dataset_from_string(std::string_view content) {
    auto all = text::lines(content);
    if (all.empty()) throw Error(Errc::MalformedFile, "empty dataset file");
    auto header = text::trim(all[0]);
    if (header.rfind(kDatasetMagic, 0) != 0) throw Error(Errc::MalformedFile, "invalid dataset header");
    Dataset d;
    bool have_m = false, have_n = false, have_scale = false;
    std::size_t n_values = 0;
    for (auto tok : text::tokens(header.substr(std::string_view(kDatasetMagic).size()))) {
        auto eq = tok.find('=');
        if (eq == std::string_view::npos) continue;
        auto key = tok.substr(0, eq);
        auto val = text::parse_double(tok.substr(eq + 1));
        if (!val) throw Error(Errc::MalformedFile, "invalid dataset header value '" + std::string(tok) + "'");
        if (key == "m") {
            d.m = static_cast<std::size_t>(*val);
            have_m = true;
        } else if (key == "N") {
            n_values = static_cast<std::size_t>(*val);
            have_n = true;
        } else if (key == "scale") {
            d.scale = *val;
            have_scale = true;
        }
    }
    if (!have_m || !have_n || !have_scale || n_values != 2 * d.m || d.m != kSurfacePoints || !(d.scale > 0.0))
        throw Error(Errc::MalformedFile, "invalid dataset header");

    std::vector<std::vector<double>> values;
    for (std::size_t li = 1; li < all.size(); ++li) {
        if (text::trim(all[li]).empty()) continue;
        auto fields = text::csv_split(all[li]);
        if (fields.size() != n_values + 1)
            throw Error(Errc::MalformedFile, "record on line " + std::to_string(li + 1) + " has " +
                                                 std::to_string(fields.size() - 1) + " values");
        std::vector<double> row(n_values);
        for (std::size_t j = 0; j < n_values; ++j) {
            auto v = text::parse_double(fields[j + 1]);
            if (!v || !std::isfinite(*v))
                throw Error(Errc::MalformedFile, "bad value on line " + std::to_string(li + 1));
            row[j] = *v;
        }
        d.names.push_back(fields[0]);
        values.push_back(std::move(row));
    }
    d.rows.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(n_values));
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = 0; j < n_values; ++j)
            d.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
    return d;
}

inline void write_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
    out << dataset_to_string(d);
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return dataset_from_string(ss.str());
}

/// parse -> chord rescale -> resample, unnormalized.
inline Eigen::VectorXd preprocess_airfoil(const RawAirfoil& raw, const CosineGrid& grid) {
    auto v = flatten(resample(rescale_chord(raw), grid));
    if (!v.allFinite()) throw Error(Errc::DegenerateSurface, "resampled values are not finite");
    return v;
}

struct PreprocessReport {
    Dataset dataset;
    std::vector<std::pair<std::string, std::string>> failures;  // (path, reason)
};

/// All `.dat` files in `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_dat_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw Error(Errc::NoFilesFound, dir.string() + " is not a directory");
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".dat") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// Builds a normalized dataset from coordinate files; unreadable files are
/// reported and skipped. Records are named by file stem.
inline PreprocessReport preprocess_files(const std::vector<std::filesystem::path>& files) {
    if (files.empty()) throw Error(Errc::NoFilesFound, "no .dat files");
    const auto grid = cosine_grid(kSurfacePoints);
    PreprocessReport report;
    std::vector<Eigen::VectorXd> rows;
    for (const auto& f : files) {
        try {
            auto v = preprocess_airfoil(read_dat_file(f.string()), grid);
            rows.push_back(std::move(v));
            report.dataset.names.push_back(f.stem().string());
        } catch (const Error& e) {
            report.failures.emplace_back(f.string(), e.what());
        }
    }
    Eigen::MatrixXd all(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kAirfoilDim));
    for (std::size_t i = 0; i < rows.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    auto norm = normalize_dataset(all);
    report.dataset.rows = std::move(norm.rows);
    report.dataset.scale = norm.scale;
    return report;
}

}  // namespace foilgen
