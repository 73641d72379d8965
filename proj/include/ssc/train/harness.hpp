#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ssc/annotations.hpp"
#include "ssc/nn/network.hpp"
#include "ssc/wsi/maps.hpp"
#include "ssc/wsi/slide.hpp"

namespace ssc::train {

// --- schedules -------------------------------------------------------------

struct LrScheduleState {
  double learning_rate = 0.01;
  double drop_factor = 5.0;
  double patience = 10.0;
  double patience_growth = 1.2;
  double best_metric = -std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
};

/// Higher metric is better; a tie counts as stale. Once the stale count
/// exceeds the patience the rate is divided by drop_factor and the patience
/// grows by patience_growth.
LrScheduleState lr_step(LrScheduleState state, double epoch_metric);

/// growth^epoch, computed in closed form.
double negative_weight_at(int epoch, double growth = 1.0034);
/// CNN II loss weights: {normal stroma, tumour stroma}.
std::vector<double> class_weight_at(int epoch, double growth = 1.0034);

// --- augmentation ----------------------------------------------------------

struct AugmentationConfig {
  bool rotate = true;
  bool flip = true;
  double hue_jitter_deg = 18.0;
  double saturation_jitter = 0.15;
};

struct AugmentParams {
  int quarter_turns = 0;
  bool flip_horizontal = false;
  bool flip_vertical = false;
  double hue_deg = 0.0;
  double saturation_scale = 1.0;
};

AugmentParams draw_augmentation(const AugmentationConfig& config, Rng& rng);
RgbImage rotate90(const RgbImage& img, int quarter_turns);
/// Geometry first, then one hue offset and saturation factor for the whole patch.
RgbImage apply_augmentation(const RgbImage& img, const AugmentParams& p);
RgbImage augment(const RgbImage& img, const AugmentationConfig& config, Rng& rng);

// --- patch sampling --------------------------------------------------------

struct Task {
  std::string name;
  std::vector<std::string> labels;  // class index = position
};
Task cnn1_task();  // epithelium, stroma, fat
Task cnn2_task();  // normal_stroma, tumor_stroma

/// Enumerates, per class, every pixel that may serve as a patch centre: the
/// pixel centre lies inside a region of that class and the patch fits on the
/// slide. Centres are then drawn uniformly: class first, then pixel.
class PatchSampler {
 public:
  struct Sample {
    int slide = 0;
    int x = 0;  // centre pixel; the patch starts at (x - size/2, y - size/2)
    int y = 0;
    int label = 0;
  };

  PatchSampler(Task task, std::span<const wsi::SlideImage> slides,
               std::span<const AnnotatedRegion> regions, int patch_size);

  const Task& task() const { return task_; }
  int classes() const { return static_cast<int>(task_.labels.size()); }
  int patch_size() const { return patch_; }
  std::size_t eligible(int cls) const { return centres_[cls].size(); }

  Sample draw(Rng& rng) const;
  RgbImage patch(const Sample& s) const;

 private:
  struct Centre {
    std::uint32_t slide;
    std::uint16_t x, y;
  };
  Task task_;
  std::span<const wsi::SlideImage> slides_;
  int patch_;
  std::vector<std::vector<Centre>> centres_;
};

struct Minibatch {
  nn::Tensor input;  // (N, 3, size, size)
  std::vector<int> labels;
  std::vector<PatchSampler::Sample> samples;
};

/// Patch k draws and augments with its own stream derive_rng(seed, first + k),
/// so batches do not depend on the thread count. `augmentation` may be null.
Minibatch sample_minibatch(const PatchSampler& sampler, int batch_size, std::uint64_t seed,
                           std::uint64_t first, const AugmentationConfig* augmentation,
                           int threads = 1);
Minibatch sample_minibatch(const PatchSampler& sampler, int batch_size, Rng& rng,
                           const AugmentationConfig* augmentation = nullptr);

// --- training loop ---------------------------------------------------------

struct TrainConfig {
  int batch_size = 128;
  int steps_per_epoch = 20;
  int max_epochs = 30;
  double min_learning_rate = 1e-5;
  double momentum = 0.9;
  double l2_lambda = 0.003;
  LrScheduleState schedule;
  bool escalate_negative_weight = false;  // CNN II
  double weight_growth = 1.0034;
  AugmentationConfig augmentation;
  int validation_patches = 600;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct HistoryRow {
  int epoch = 0;
  double loss = 0;
  double val_acc = 0;
  double lr = 0;
  double neg_weight = 1;
};

struct TrainResult {
  nn::Network network;  // parameters of the best validation epoch
  std::vector<HistoryRow> history;
  double best_val_acc = 0;
};

/// Runs until max_epochs or until the rate falls below min_learning_rate.
/// `first_epoch` offsets the epoch counter used by the class-weight schedule.
TrainResult train(const nn::Network& init, const PatchSampler& training,
                  const PatchSampler& validation, const TrainConfig& config,
                  int first_epoch = 0);

/// Patch-level accuracy of the network on fixed samples.
double evaluate_accuracy(const nn::Network& net, const PatchSampler& sampler,
                         std::span<const PatchSampler::Sample> samples);

// --- hard negative mining --------------------------------------------------

struct MiningConfig {
  int min_cells = 64;
  double threshold = 0.9;
};

/// Turns false-positive cells into `mined` rectangles labelled `label`.
/// Components smaller than min_cells are ignored; within a component only
/// cells whose whole stride x stride footprint is in `pure` are emitted.
std::vector<AnnotatedRegion> regions_from_cells(const Mask& false_positive, const Mask& pure,
                                                const wsi::MapGeometry& g,
                                                const std::string& slide_id,
                                                const std::string& label, int min_cells);

/// CNN II: truth normal stroma with likelihood >= threshold.
std::vector<AnnotatedRegion> mine_cnn2(const wsi::LikelihoodMap& map,
                                       const Grid<std::uint8_t>& truth,
                                       const std::string& slide_id, const MiningConfig& config);
/// CNN I: cells whose predicted tissue differs from the truth, relabelled
/// with the truth class.
std::vector<AnnotatedRegion> mine_cnn1(const wsi::LabelMap& map, const Grid<std::uint8_t>& truth,
                                       const std::string& slide_id, const MiningConfig& config);

}  // namespace ssc::train
