#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssc/annotations.hpp"
#include "ssc/geometry/features.hpp"
#include "ssc/grid.hpp"
#include "ssc/wsi/maps.hpp"
#include "ssc/wsi/slide.hpp"

namespace ssc::corpus {

/// Ground-truth palette indices.
enum class Truth : std::uint8_t {
  background = 0,
  epithelium = 1,
  normal_stroma = 2,
  fat = 3,
  tumor_stroma = 4,
};

wsi::Tissue tissue_of(std::uint8_t truth);

struct CorpusConfig {
  int n_benign = 0;
  int n_cancer = 0;
  std::uint64_t seed = 0;
  int size = 256;
  double spacing_um = 0.455;
  double hue_jitter_deg = 6.0;
  double texture_amplitude = 0.07;
  double benign_cluster_prob = 0.5;  // benign slides may carry a duct cluster
  std::array<double, 3> split_weights{270, 80, 296};
};

struct SyntheticSlide {
  wsi::SlideImage image;
  Grid<std::uint8_t> truth;  // Truth codes per pixel
  std::vector<AnnotatedRegion> regions;
  /// Pixel fractions of tissue: epithelium, stroma (both kinds), fat, tumour stroma.
  std::array<double, 4> fractions{};
};

struct ManifestRow {
  std::string slide_id;
  std::string patient_id;
  std::string label;  // benign or cancer
  std::string split;  // train, validation or test
  bool operator==(const ManifestRow&) const = default;
};

struct Corpus {
  std::vector<SyntheticSlide> slides;
  std::vector<ManifestRow> manifest;
};

SyntheticSlide generate_slide(const CorpusConfig& config, int index, bool cancer,
                              const std::string& slide_id, const std::string& patient_id);
/// Patients own 1-3 slides of one class; splits are drawn per class over
/// patients so every split stays patient-disjoint.
Corpus generate_corpus(const CorpusConfig& config, int threads = 1);

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestRow>& rows);
wsi::SlideImage load_slide(const std::filesystem::path& dir, const std::string& slide_id);
Grid<std::uint8_t> load_truth(const std::filesystem::path& dir, const std::string& slide_id);
std::vector<AnnotatedRegion> load_regions(const std::filesystem::path& dir,
                                          const std::string& slide_id);

/// Ground truth sampled at the centre pixel of every map cell.
wsi::LabelMap truth_label_map(const Grid<std::uint8_t>& truth, const wsi::MapGeometry& g);
/// 1 on tumour stroma, 0 on normal stroma, not applicable elsewhere.
wsi::LikelihoodMap truth_likelihood_map(const Grid<std::uint8_t>& truth,
                                        const wsi::MapGeometry& g);
geometry::FeatureVector oracle_features(const Grid<std::uint8_t>& truth,
                                        const wsi::MapGeometry& g, double threshold,
                                        const geometry::FeatureManifest& manifest =
                                            geometry::default_manifest());

}  // namespace ssc::corpus
