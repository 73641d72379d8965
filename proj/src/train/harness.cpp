#include "ssc/train/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssc/color.hpp"
#include "ssc/corpus/corpus.hpp"
#include "ssc/parallel.hpp"
#include "ssc/wsi/inference.hpp"

namespace ssc::train {

LrScheduleState lr_step(LrScheduleState s, double metric) {
  if (metric > s.best_metric) {
    s.best_metric = metric;
    s.stale_epochs = 0;
    return s;
  }
  ++s.stale_epochs;
  if (s.stale_epochs > s.patience) {
    s.learning_rate /= s.drop_factor;
    s.patience *= s.patience_growth;
    s.stale_epochs = 0;
  }
  return s;
}

double negative_weight_at(int epoch, double growth) {
  if (epoch < 0) throw ConfigError("class weight requested for a negative epoch");
  return std::pow(growth, epoch);
}

std::vector<double> class_weight_at(int epoch, double growth) {
  return {negative_weight_at(epoch, growth), 1.0};
}

AugmentParams draw_augmentation(const AugmentationConfig& c, Rng& rng) {
  AugmentParams p;
  if (c.rotate) p.quarter_turns = static_cast<int>(uniform_index(rng, 4));
  if (c.flip) {
    p.flip_horizontal = uniform01(rng) < 0.5;
    p.flip_vertical = uniform01(rng) < 0.5;
  }
  if (c.hue_jitter_deg > 0) p.hue_deg = uniform(rng, -c.hue_jitter_deg, c.hue_jitter_deg);
  if (c.saturation_jitter > 0)
    p.saturation_scale = 1.0 + uniform(rng, -c.saturation_jitter, c.saturation_jitter);
  return p;
}

RgbImage rotate90(const RgbImage& img, int quarter_turns) {
  RgbImage cur = img;
  for (int t = 0; t < ((quarter_turns % 4) + 4) % 4; ++t) {
    RgbImage next(cur.height, cur.width);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < next.height; ++y)
        for (int x = 0; x < next.width; ++x)
          next.at(c, y, x) = cur.at(c, x, cur.width - 1 - y);
    cur = std::move(next);
  }
  return cur;
}

RgbImage apply_augmentation(const RgbImage& img, const AugmentParams& p) {
  RgbImage out = rotate90(img, p.quarter_turns);
  if (p.flip_horizontal || p.flip_vertical) {
    RgbImage f(out.width, out.height);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
          f.at(c, y, x) = out.at(c, p.flip_vertical ? out.height - 1 - y : y,
                                 p.flip_horizontal ? out.width - 1 - x : x);
    out = std::move(f);
  }
  if (p.hue_deg != 0.0 || p.saturation_scale != 1.0) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        Hsv h = rgb_to_hsv(out.at(0, y, x), out.at(1, y, x), out.at(2, y, x));
        h.h = std::fmod(h.h + p.hue_deg, 360.0);
        if (h.h < 0) h.h += 360.0;
        h.s = std::clamp(h.s * p.saturation_scale, 0.0, 1.0);
        double r, g, b;
        hsv_to_rgb(h, r, g, b);
        out.at(0, y, x) = static_cast<float>(std::clamp(r, 0.0, 1.0));
        out.at(1, y, x) = static_cast<float>(std::clamp(g, 0.0, 1.0));
        out.at(2, y, x) = static_cast<float>(std::clamp(b, 0.0, 1.0));
      }
  }
  return out;
}

RgbImage augment(const RgbImage& img, const AugmentationConfig& config, Rng& rng) {
  return apply_augmentation(img, draw_augmentation(config, rng));
}

Task cnn1_task() { return {"CNN_I", {"epithelium", "stroma", "fat"}}; }
Task cnn2_task() { return {"CNN_II", {"normal_stroma", "tumor_stroma"}}; }

PatchSampler::PatchSampler(Task task, std::span<const wsi::SlideImage> slides,
                           std::span<const AnnotatedRegion> regions, int patch_size)
    : task_(std::move(task)), slides_(slides), patch_(patch_size),
      centres_(task_.labels.size()) {
  if (patch_size <= 0) throw ConfigError("patch size must be positive");
  // eligible centres, deduplicated per slide and class
  std::vector<std::vector<std::vector<const AnnotatedRegion*>>> by_slide(
      slides.size(), std::vector<std::vector<const AnnotatedRegion*>>(task_.labels.size()));
  for (const auto& r : regions) {
    auto it = std::find(task_.labels.begin(), task_.labels.end(), r.label);
    if (it == task_.labels.end()) continue;
    auto s = std::find_if(slides.begin(), slides.end(),
                          [&](const wsi::SlideImage& im) { return im.slide_id == r.slide_id; });
    if (s == slides.end()) continue;
    by_slide[s - slides.begin()][it - task_.labels.begin()].push_back(&r);
  }
  const int half = patch_ / 2;
  for (std::size_t si = 0; si < slides.size(); ++si) {
    const auto& slide = slides[si];
    for (std::size_t cls = 0; cls < task_.labels.size(); ++cls) {
      if (by_slide[si][cls].empty()) continue;
      Mask seen(slide.height(), slide.width());
      for (const AnnotatedRegion* r : by_slide[si][cls])
        for_each_pixel(r->polygon, slide.width(), slide.height(), [&](int x, int y) {
          if (x - half < 0 || y - half < 0 || x - half + patch_ > slide.width() ||
              y - half + patch_ > slide.height())
            return;
          seen.at(y, x) = 1;
        });
      for (int y = 0; y < slide.height(); ++y)
        for (int x = 0; x < slide.width(); ++x)
          if (seen.at(y, x))
            centres_[cls].push_back({static_cast<std::uint32_t>(si), static_cast<std::uint16_t>(x),
                                     static_cast<std::uint16_t>(y)});
    }
  }
  for (std::size_t cls = 0; cls < centres_.size(); ++cls)
    if (centres_[cls].empty())
      throw ConfigError("no eligible region for class " + task_.labels[cls] + " in task " + task_.name);
}

PatchSampler::Sample PatchSampler::draw(Rng& rng) const {
  const int cls = static_cast<int>(uniform_index(rng, centres_.size()));
  const Centre& c = centres_[cls][uniform_index(rng, centres_[cls].size())];
  return {static_cast<int>(c.slide), c.x, c.y, cls};
}

RgbImage PatchSampler::patch(const Sample& s) const {
  return slides_[s.slide].tile(s.x - patch_ / 2, s.y - patch_ / 2, patch_, patch_);
}

Minibatch sample_minibatch(const PatchSampler& sampler, int batch_size, std::uint64_t seed,
                           std::uint64_t first, const AugmentationConfig* augmentation,
                           int threads) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  const int p = sampler.patch_size();
  Minibatch mb;
  mb.input = nn::Tensor({batch_size, 3, p, p});
  mb.labels.resize(batch_size);
  mb.samples.resize(batch_size);
  parallel_for(static_cast<std::size_t>(batch_size), threads, [&](std::size_t k) {
    Rng rng = derive_rng(seed, first + k);
    const auto s = sampler.draw(rng);
    RgbImage img = sampler.patch(s);
    if (augmentation) img = augment(img, *augmentation, rng);
    wsi::to_input(img, mb.input, static_cast<int>(k));
    mb.labels[k] = s.label;
    mb.samples[k] = s;
  });
  return mb;
}

Minibatch sample_minibatch(const PatchSampler& sampler, int batch_size, Rng& rng,
                           const AugmentationConfig* augmentation) {
  const std::uint64_t seed = rng();
  return sample_minibatch(sampler, batch_size, seed, 0, augmentation, 1);
}

double evaluate_accuracy(const nn::Network& net, const PatchSampler& sampler,
                         std::span<const PatchSampler::Sample> samples) {
  if (samples.empty()) return 0.0;
  const int p = sampler.patch_size();
  const std::size_t chunk = 128;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - start);
    nn::Tensor batch({static_cast<int>(n), 3, p, p});
    for (std::size_t k = 0; k < n; ++k)
      wsi::to_input(sampler.patch(samples[start + k]), batch, static_cast<int>(k));
    const auto pred = nn::argmax_channels(net.logits(batch));
    for (std::size_t k = 0; k < n; ++k) correct += pred[k] == samples[start + k].label;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train(const nn::Network& init, const PatchSampler& training,
                  const PatchSampler& validation, const TrainConfig& config, int first_epoch) {
  if (training.classes() != validation.classes())
    throw ConfigError("training and validation tasks differ");
  TrainResult result;
  result.network = init;
  nn::Network net = init;
  LrScheduleState schedule = config.schedule;
  nn::OptimizerState opt;
  opt.momentum = config.momentum;
  opt.l2_lambda = config.l2_lambda;

  std::vector<PatchSampler::Sample> val;
  Rng vr = derive_rng(config.seed, 0xC0FFEEull);
  for (int i = 0; i < config.validation_patches; ++i) val.push_back(validation.draw(vr));
  result.best_val_acc = -1.0;

  for (int e = 0; e < config.max_epochs; ++e) {
    if (schedule.learning_rate < config.min_learning_rate) break;
    const int epoch = first_epoch + e;
    nn::LossConfig loss_cfg;
    loss_cfg.class_weights.assign(training.classes(), 1.0);
    if (config.escalate_negative_weight) loss_cfg.class_weights = class_weight_at(epoch, config.weight_growth);
    opt.learning_rate = schedule.learning_rate;

    double loss_sum = 0;
    for (int step = 0; step < config.steps_per_epoch; ++step) {
      const std::uint64_t stream = static_cast<std::uint64_t>(epoch) * 1000003ull + step;
      Rng step_rng = derive_rng(config.seed, stream);
      const std::uint64_t batch_seed = step_rng();
      Minibatch mb = sample_minibatch(training, config.batch_size, batch_seed, 0,
                                      &config.augmentation, config.threads);
      nn::ForwardCache<float> cache;
      nn::Tensor logits = net.logits(mb.input, true, &step_rng, &cache);
      auto loss = nn::weighted_cross_entropy(nn::softmax(logits), mb.labels, loss_cfg);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << " step " << step
            << " (learning rate " << opt.learning_rate << ")";
        throw NonFiniteError(msg.str());
      }
      loss_sum += loss.loss;
      auto grads = net.backward(cache, loss.grad);
      std::vector<nn::ParamRef> refs;
      for (std::size_t i = 0; i < net.params().size(); ++i) {
        auto& p = net.params()[i];
        if (p.weights.size() == 0) continue;
        refs.push_back({p.weights.data(), grads[i].weights.data(), true});
        refs.push_back({p.bias, grads[i].bias, false});
      }
      nn::sgd_nesterov_step(refs, opt);
    }

    const double acc = evaluate_accuracy(net, validation, val);
    result.history.push_back({epoch, config.steps_per_epoch ? loss_sum / config.steps_per_epoch : 0.0,
                              acc, opt.learning_rate, loss_cfg.class_weights[0]});
    if (acc > result.best_val_acc) {
      result.best_val_acc = acc;
      result.network = net;
    }
    schedule = lr_step(schedule, acc);
  }
  if (result.best_val_acc < 0) result.best_val_acc = evaluate_accuracy(net, validation, val);
  return result;
}

std::vector<AnnotatedRegion> regions_from_cells(const Mask& fp, const Mask& pure,
                                                const wsi::MapGeometry& g,
                                                const std::string& slide_id,
                                                const std::string& label, int min_cells) {
  if (!fp.same_shape(pure)) throw ShapeError("mining masks differ in shape");
  std::vector<AnnotatedRegion> out;
  const int half = g.stride / 2;
  for (const auto& comp : wsi::connected_components(fp)) {
    if (static_cast<int>(comp.size()) < min_cells) continue;
    // row runs of pure cells; comp is sorted row-major
    for (std::size_t k = 0; k < comp.size();) {
      if (!pure.at(comp[k].row, comp[k].col)) {
        ++k;
        continue;
      }
      std::size_t end = k + 1;
      while (end < comp.size() && comp[end].row == comp[k].row &&
             comp[end].col == comp[end - 1].col + 1 && pure.at(comp[end].row, comp[end].col))
        ++end;
      const double x0 = g.centre(comp[k].col) - half;
      const double x1 = g.centre(comp[end - 1].col) - half + g.stride;
      const double y0 = g.centre(comp[k].row) - half;
      const double y1 = y0 + g.stride;
      out.push_back({slide_id, label, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, Provenance::mined});
      k = end;
    }
  }
  return out;
}

namespace {

/// Cells whose footprint pixels all carry truth code `code`.
Mask pure_cells(const Grid<std::uint8_t>& truth, const wsi::MapGeometry& g, int rows, int cols,
                auto&& accept) {
  Mask out(rows, cols);
  const int half = g.stride / 2;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      bool ok = true;
      for (int y = g.centre(i) - half; ok && y < g.centre(i) - half + g.stride; ++y)
        for (int x = g.centre(j) - half; ok && x < g.centre(j) - half + g.stride; ++x)
          ok = truth.contains(y, x) && accept(truth.at(y, x));
      out.at(i, j) = ok;
    }
  return out;
}

}  // namespace

std::vector<AnnotatedRegion> mine_cnn2(const wsi::LikelihoodMap& map,
                                       const Grid<std::uint8_t>& truth,
                                       const std::string& slide_id, const MiningConfig& config) {
  const auto& g = map.geometry;
  const int rows = map.values.rows(), cols = map.values.cols();
  const auto normal = static_cast<std::uint8_t>(corpus::Truth::normal_stroma);
  Mask fp(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      fp.at(i, j) = map.applicable.at(i, j) && map.values.at(i, j) >= config.threshold &&
                    truth.at(g.centre(i), g.centre(j)) == normal;
  Mask pure = pure_cells(truth, g, rows, cols, [&](std::uint8_t v) { return v == normal; });
  return regions_from_cells(fp, pure, g, slide_id, "normal_stroma", config.min_cells);
}

std::vector<AnnotatedRegion> mine_cnn1(const wsi::LabelMap& map, const Grid<std::uint8_t>& truth,
                                       const std::string& slide_id, const MiningConfig& config) {
  const auto& g = map.geometry;
  const int rows = map.labels.rows(), cols = map.labels.cols();
  std::vector<AnnotatedRegion> out;
  const Task task = cnn1_task();
  for (int cls = 1; cls <= 3; ++cls) {
    Mask fp(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const int t = static_cast<int>(corpus::tissue_of(truth.at(g.centre(i), g.centre(j))));
        fp.at(i, j) = t == cls && map.labels.at(i, j) != 0 && map.labels.at(i, j) != cls;
      }
    Mask pure = pure_cells(truth, g, rows, cols, [&](std::uint8_t v) {
      return static_cast<int>(corpus::tissue_of(v)) == cls;
    });
    auto r = regions_from_cells(fp, pure, g, slide_id, task.labels[cls - 1], config.min_cells);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace ssc::train
