#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssc/wsi/maps.hpp"

namespace ssc::geometry {

struct FeatureDef {
  std::string name;
  std::string family;     // tissue_amount, count, morphology, delaunay, voronoi, likelihood
  std::string source;     // CNN_I or CNN_II
  std::string statistic;  // mean, std, median, iqr, value
  bool operator==(const FeatureDef&) const = default;
};

struct FeatureManifest {
  std::string version;
  std::vector<FeatureDef> features;
  bool operator==(const FeatureManifest&) const = default;
};

/// 31 CNN I features followed by 36 CNN II features.
const FeatureManifest& default_manifest();
std::string manifest_to_json(const FeatureManifest& m);
FeatureManifest manifest_from_json(const std::string& text);
FeatureManifest load_manifest(const std::filesystem::path& path);

struct FeatureVector {
  std::string manifest_version;
  std::vector<std::string> names;
  std::vector<double> values;
};

/// `cnn2` should already be restricted to CNN I stroma. Tumour-stroma
/// components are the 8-connected cells with likelihood >= threshold.
/// Blocks with fewer than three regions get zero Delaunay and Voronoi stats;
/// a slide without tumour-stroma components gets an all-zero CNN II block.
FeatureVector assemble_features(const wsi::LabelMap& cnn1, const wsi::LikelihoodMap& cnn2,
                                double threshold,
                                const FeatureManifest& manifest = default_manifest());

}  // namespace ssc::geometry
