#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssc::forest {

struct Dataset {
  std::string manifest_version;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;  // 0 benign, 1 cancer
  std::vector<std::string> patient_ids;
  std::vector<std::string> slide_ids;

  std::size_t size() const { return rows.size(); }
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;  // go left when x <= threshold
  int left = -1;
  int right = -1;
  std::vector<double> probs;  // leaves only: class frequencies
  bool operator==(const Node&) const = default;
};

struct Tree {
  std::vector<Node> nodes;  // root first
  bool operator==(const Tree&) const = default;
};

struct ForestModel {
  std::string manifest_version;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;
  int classes = 2;
  std::vector<Tree> trees;
  bool operator==(const ForestModel&) const = default;
};

struct ForestConfig {
  int n_trees = 100;
  int max_features = 0;  // 0: ceil(sqrt(p))
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Bootstrap rows per tree, Gini splits over a random feature subset, trees
/// grown until pure or fewer than two samples. If none of the drawn features
/// can split a node, further features are drawn before giving up.
ForestModel rf_train(const Dataset& data, const ForestConfig& config);
/// Mean over trees of the leaf's cancer frequency.
double rf_predict(const ForestModel& model, std::span<const double> features);
double rf_predict(const ForestModel& model, std::span<const double> features,
                  const std::string& manifest_version);

std::string to_json(const ForestModel& model);
ForestModel forest_from_json(const std::string& text);
void save_forest(const std::filesystem::path& path, const ForestModel& model);
ForestModel load_forest(const std::filesystem::path& path);

/// Out-of-fold scores from k-fold cross-validation with patient-disjoint folds.
std::vector<double> cross_validated_scores(const Dataset& data, int folds,
                                           const ForestConfig& config);

struct RocPoint {
  double threshold = 0;
  double fpr = 0;
  double tpr = 0;
};

struct RocResult {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0;
};

/// Tied scores move together, which gives ties half credit.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ConfidenceInterval {
  double low = 0;
  double high = 0;
  int resamples = 0;  // successful resamples
};

/// Resamples patients with replacement, separately within benign and cancer
/// patients, and reports percentile bounds of the resampled AUCs.
ConfidenceInterval bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                std::span<const std::string> patient_ids, int n, double level,
                                std::uint64_t seed, int threads = 1);

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc);
/// Square plot: false positive rate on x, true positive rate on y.
void write_roc_png(const std::filesystem::path& path, const RocResult& roc, int size = 400);

}  // namespace ssc::forest
