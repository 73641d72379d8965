#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ssc/arch/architectures.hpp"
#include "ssc/corpus/corpus.hpp"
#include "ssc/train/harness.hpp"

using namespace ssc;
using namespace ssc::train;

namespace {

// Patience after k drops, floor(10 * 1.2^k), in exact integer arithmetic.
long long patience_floor(int k) {
  long long num = 10, den = 1;
  for (int i = 0; i < k; ++i) {
    num *= 6;
    den *= 5;
  }
  return num / den;
}

RgbImage random_patch(Rng& rng, int size) {
  RgbImage p(size, size);
  for (float& v : p.data) v = static_cast<float>(uniform01(rng));
  return p;
}

double mean(const RgbImage& p) {
  double s = 0;
  for (float v : p.data) s += v;
  return s / p.data.size();
}

struct Fixture {
  std::vector<wsi::SlideImage> slides;
  std::vector<Grid<std::uint8_t>> truth;
  std::vector<AnnotatedRegion> regions;
  Fixture(int n, std::uint64_t seed) {
    corpus::CorpusConfig c;
    c.seed = seed;
    for (int i = 0; i < n; ++i) {
      auto s = corpus::generate_slide(c, i, true, "S" + std::to_string(i), "P");
      slides.push_back(s.image);
      truth.push_back(s.truth);
      regions.insert(regions.end(), s.regions.begin(), s.regions.end());
    }
  }
};

}  // namespace

TEST_CASE("learning-rate schedule follows the closed-form step function") {
  LrScheduleState s;
  s = lr_step(s, 0.5);  // first epoch always improves on -inf
  for (int i = 0; i < 10; ++i) s = lr_step(s, 0.5);
  CHECK(s.learning_rate == 0.01);
  s = lr_step(s, 0.5);  // 11th stale epoch
  CHECK(std::abs(s.learning_rate - 0.002) < 1e-15);
  CHECK(std::abs(s.patience - 12.0) < 1e-12);
  for (int i = 0; i < 13; ++i) s = lr_step(s, 0.5);
  CHECK(std::abs(s.learning_rate - 0.0004) < 1e-15);
  CHECK(std::abs(s.patience - 14.4) < 1e-12);

  // a long scripted trace: 7 improving epochs, then a plateau
  LrScheduleState t;
  std::vector<double> trace;
  for (int e = 0; e < 120; ++e) {
    trace.push_back(t.learning_rate);
    t = lr_step(t, e < 7 ? 0.1 * e : 0.6);
  }
  for (int e = 0; e < 120; ++e) {
    const int stale = std::max(0, e - 7);  // stale epochs completed before epoch e
    int drops = 0;
    long long used = 0;
    while (used + patience_floor(drops) + 1 <= stale) used += patience_floor(drops++) + 1;
    CHECK(std::abs(trace[e] - 0.01 / std::pow(5.0, drops)) < 1e-15);
  }

  LrScheduleState u;
  for (int e = 0; e < 100; ++e) u = lr_step(u, e);
  CHECK(u.learning_rate == 0.01);
  // ties are stale
  LrScheduleState v;
  v = lr_step(v, 0.3);
  v = lr_step(v, 0.3);
  CHECK(v.stale_epochs == 1);
}

TEST_CASE("class weight schedule") {
  CHECK(negative_weight_at(0) == 1.0);
  CHECK(std::abs(negative_weight_at(1) - 1.0034) < 1e-15);
  const double w200 = negative_weight_at(200);
  CHECK(std::abs(w200 - 1.9716) < 1e-4);
  CHECK(w200 >= 1.95);
  CHECK(w200 <= 2.0);
  double prev = 0;
  for (int e = 0; e < 300; ++e) {
    const double w = negative_weight_at(e);
    CHECK(w > prev);
    prev = w;
  }
  // no drift against repeated multiplication in long double
  long double acc = 1;
  for (int e = 0; e < 500; ++e) acc *= 1.0034L;
  CHECK(std::abs(negative_weight_at(500) - static_cast<double>(acc)) < 1e-12);
  CHECK(class_weight_at(10) == std::vector<double>{negative_weight_at(10), 1.0});
  CHECK_THROWS_AS(negative_weight_at(-1), ConfigError);
}

TEST_CASE("augmentation identities") {
  Rng rng(4);
  const RgbImage p = random_patch(rng, 16);
  CHECK(apply_augmentation(p, AugmentParams{}) == p);
  AugmentParams full;
  full.hue_deg = 360;
  const RgbImage q = apply_augmentation(p, full);
  for (std::size_t i = 0; i < p.data.size(); ++i) CHECK(std::abs(q.data[i] - p.data[i]) < 1e-6);

  RgbImage r = p;
  for (int k = 0; k < 4; ++k) r = rotate90(r, 1);
  CHECK(r == p);
  CHECK(rotate90(p, 2) == rotate90(rotate90(p, 1), 1));

  for (int k = 0; k < 20; ++k) {
    AugmentationConfig geo;
    geo.hue_jitter_deg = 0;
    geo.saturation_jitter = 0;
    const RgbImage g = augment(p, geo, rng);
    CHECK(std::abs(mean(g) - mean(p)) < 1e-6);
    std::multiset<float> a(p.data.begin(), p.data.end()), b(g.data.begin(), g.data.end());
    CHECK(a == b);  // pure permutation
    const RgbImage j = augment(p, AugmentationConfig{}, rng);
    for (float v : j.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  for (int k = 0; k < 100; ++k) {
    AugmentParams d = draw_augmentation(AugmentationConfig{}, rng);
    CHECK(std::abs(d.hue_deg) <= 18.0);
    CHECK(std::abs(d.saturation_scale - 1.0) <= 0.15);
  }
}

TEST_CASE("patch sampling is class-uniform and reproducible") {
  Fixture f(3, 17);
  PatchSampler s(cnn1_task(), f.slides, f.regions, 32);
  for (int c = 0; c < 3; ++c) CHECK(s.eligible(c) > 0);
  Rng rng(2);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 3000; ++i) counts[s.draw(rng).label]++;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(chi2 < 9.21);  // 99% quantile, 2 degrees of freedom

  // every centre lies inside a region of its class
  for (int i = 0; i < 200; ++i) {
    auto d = s.draw(rng);
    bool inside = false;
    for (const auto& r : f.regions)
      if (r.slide_id == f.slides[d.slide].slide_id && r.label == cnn1_task().labels[d.label])
        inside |= point_in_polygon(r.polygon, {d.x + 0.5, d.y + 0.5});
    CHECK(inside);
  }

  AugmentationConfig aug;
  auto a = sample_minibatch(s, 24, 99, 0, &aug, 1);
  auto b = sample_minibatch(s, 24, 99, 0, &aug, 3);
  CHECK(std::ranges::equal(a.input.data(), b.input.data()));
  CHECK(a.labels == b.labels);
  auto plain = sample_minibatch(s, 4, 5, 0, nullptr, 1);
  for (int k = 0; k < 4; ++k) {
    const RgbImage p = s.patch(plain.samples[k]);
    CHECK(plain.input.at(k, 1, 3, 7) == p.at(1, 3, 7) - 0.5f);
  }

  Task only{"one", {"stroma"}};
  PatchSampler single(only, f.slides, f.regions, 32);
  auto mb = sample_minibatch(single, 50, 3, 0, nullptr, 1);
  for (int l : mb.labels) CHECK(l == 0);

  Task missing{"none", {"stroma", "cartilage"}};
  CHECK_THROWS_AS(PatchSampler(missing, f.slides, f.regions, 32), ConfigError);
}

TEST_CASE("training loop: zero steps, determinism, history") {
  Fixture f(3, 23);
  std::span<const wsi::SlideImage> all(f.slides);
  PatchSampler tr(cnn2_task(), all.first(2), f.regions, 32);
  PatchSampler va(cnn2_task(), all.last(1), f.regions, 32);
  Rng rng(1);
  const nn::Network init = arch::build_network(arch::tiny_cnn2_spec(), rng);

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.steps_per_epoch = 0;
  cfg.max_epochs = 2;
  cfg.validation_patches = 20;
  cfg.escalate_negative_weight = true;
  auto idle = train::train(init, tr, va, cfg);
  CHECK(idle.network == init);

  cfg.steps_per_epoch = 3;
  cfg.max_epochs = 3;
  auto a = train::train(init, tr, va, cfg, 5);
  cfg.threads = 2;
  auto b = train::train(init, tr, va, cfg, 5);
  REQUIRE(a.history.size() == 3);
  CHECK(a.network == b.network);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].val_acc == b.history[i].val_acc);
    CHECK(a.history[i].epoch == 5 + static_cast<int>(i));
    CHECK(a.history[i].neg_weight == negative_weight_at(5 + static_cast<int>(i)));
  }
  CHECK_FALSE(a.network == init);
}

TEST_CASE("mining recovers a planted false-positive blob") {
  // truth: normal stroma everywhere except a tumour-stroma square
  Grid<std::uint8_t> truth(256, 256, static_cast<std::uint8_t>(corpus::Truth::normal_stroma));
  for (int y = 150; y < 230; ++y)
    for (int x = 150; x < 230; ++x)
      truth.at(y, x) = static_cast<std::uint8_t>(corpus::Truth::tumor_stroma);
  wsi::LikelihoodMap m;
  m.geometry = {4, 32, 16, 0.455};
  const int n = m.geometry.extent(256);
  m.values = Grid<float>(n, n, 0.1f);
  m.applicable = Mask(n, n, 1);
  auto plant = [&](int r0, int c0, int h, int w) {
    for (int r = r0; r < r0 + h; ++r)
      for (int c = c0; c < c0 + w; ++c) m.values.at(r, c) = 0.95f;
  };
  plant(5, 8, 10, 12);   // 120 cells on normal stroma: mined
  plant(30, 2, 5, 5);    // 25 cells: below the area floor
  plant(38, 38, 12, 12); // on tumour stroma: a true positive
  MiningConfig cfg;
  auto regions = mine_cnn2(m, truth, "S", cfg);
  REQUIRE_FALSE(regions.empty());

  Mask covered(256, 256);
  for (const auto& r : regions) {
    CHECK(r.label == "normal_stroma");
    CHECK(r.provenance == Provenance::mined);
    for_each_pixel(r.polygon, 256, 256, [&](int x, int y) { covered.at(y, x) = 1; });
  }
  // oracle: union of the stride footprints of the planted cells
  Mask expected(256, 256);
  for (int r = 5; r < 15; ++r)
    for (int c = 8; c < 20; ++c)
      for (int y = 16 + 4 * r - 2; y < 16 + 4 * r + 2; ++y)
        for (int x = 16 + 4 * c - 2; x < 16 + 4 * c + 2; ++x) expected.at(y, x) = 1;
  CHECK(covered == expected);

  // raise the threshold above the planted value: nothing to mine
  cfg.threshold = 0.96;
  CHECK(mine_cnn2(m, truth, "S", cfg).empty());
}

TEST_CASE("mined regions never touch positive truth") {
  Fixture f(2, 29);
  for (std::size_t i = 0; i < f.slides.size(); ++i) {
    // an absurdly confident model: every cell is tumour stroma
    wsi::LikelihoodMap m;
    m.geometry = {4, 32, 16, 0.455};
    const int n = m.geometry.extent(256);
    m.values = Grid<float>(n, n, 1.0f);
    m.applicable = Mask(n, n, 1);
    MiningConfig cfg;
    cfg.min_cells = 8;
    auto regions = mine_cnn2(m, f.truth[i], f.slides[i].slide_id, cfg);
    CHECK_FALSE(regions.empty());
    for (const auto& r : regions)
      for_each_pixel(r.polygon, 256, 256, [&](int x, int y) {
        CHECK(f.truth[i].at(y, x) == static_cast<std::uint8_t>(corpus::Truth::normal_stroma));
      });

    // CNN I: everything called fat; mined cells get their true class
    wsi::LabelMap lm;
    lm.geometry = m.geometry;
    lm.labels = Grid<std::uint8_t>(n, n, static_cast<std::uint8_t>(wsi::Tissue::fat));
    auto r1 = mine_cnn1(lm, f.truth[i], f.slides[i].slide_id, cfg);
    CHECK_FALSE(r1.empty());
    for (const auto& r : r1) {
      CHECK(r.label != "fat");
      const auto want = r.label == "epithelium" ? wsi::Tissue::epithelium : wsi::Tissue::stroma;
      for_each_pixel(r.polygon, 256, 256,
                     [&](int x, int y) { CHECK(corpus::tissue_of(f.truth[i].at(y, x)) == want); });
    }
  }
}
