#include "ssc/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ssc/color.hpp"
#include "ssc/io/png.hpp"
#include "ssc/parallel.hpp"

namespace ssc::corpus {

using geometry::Point;

wsi::Tissue tissue_of(std::uint8_t truth) {
  switch (static_cast<Truth>(truth)) {
    case Truth::epithelium: return wsi::Tissue::epithelium;
    case Truth::normal_stroma:
    case Truth::tumor_stroma: return wsi::Tissue::stroma;
    case Truth::fat: return wsi::Tissue::fat;
    default: return wsi::Tissue::background;
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

const std::array<std::array<std::uint8_t, 3>, 5> kTruthPalette{{
    {255, 255, 255}, {112, 48, 160}, {236, 140, 180}, {250, 230, 160}, {200, 40, 60}}};

struct Structure {
  Point centre;
  double reach = 0;  // bounding radius
  Polygon polygon;
  Truth kind = Truth::epithelium;
};

Polygon star(Rng& rng, Point c, double radius, int vertices, double jitter) {
  Polygon p;
  const double phase = uniform(rng, 0, 2 * kPi);
  for (int k = 0; k < vertices; ++k) {
    const double a = phase + 2 * kPi * k / vertices;
    const double r = radius * (1 + uniform(rng, -jitter, jitter));
    p.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  // counter-clockwise in image coordinates is irrelevant for rasterising
  return p;
}

/// Moves every vertex along its ray from `c` by `d` pixels.
Polygon offset_radially(const Polygon& poly, Point c, double d) {
  Polygon out;
  for (const Point& p : poly) {
    const double dx = p.x - c.x, dy = p.y - c.y;
    const double r = std::hypot(dx, dy);
    const double s = (r + d) / r;
    out.push_back({c.x + dx * s, c.y + dy * s});
  }
  return out;
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// White noise blurred with a Gaussian, rescaled to unit variance.
Grid<float> smooth_noise(Rng& rng, int size, double sigma) {
  const int rad = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * rad + 1);
  double ksum = 0;
  for (int i = -rad; i <= rad; ++i) ksum += k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
  double sq = 0;
  for (double& v : k) {
    v /= ksum;
    sq += v * v;
  }
  const double norm = 1.0 / sq;  // 1 / sqrt(sum w^2)^2 for two separable passes
  std::normal_distribution<double> gauss(0.0, 1.0);
  Grid<double> white(size, size);
  for (auto& v : white.cells()) v = gauss(rng);
  Grid<double> tmp(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double s = 0;
      for (int i = -rad; i <= rad; ++i) s += k[i + rad] * white.at(y, std::clamp(x + i, 0, size - 1));
      tmp.at(y, x) = s;
    }
  Grid<float> out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double s = 0;
      for (int i = -rad; i <= rad; ++i) s += k[i + rad] * tmp.at(std::clamp(y + i, 0, size - 1), x);
      out.at(y, x) = static_cast<float>(s * std::sqrt(norm));
    }
  return out;
}

class SlideBuilder {
 public:
  SlideBuilder(const CorpusConfig& cfg, Rng& rng, bool cancer)
      : cfg_(cfg), rng_(rng), cancer_(cancer), n_(cfg.size),
        truth_(cfg.size, cfg.size, static_cast<std::uint8_t>(Truth::background)) {}

  SyntheticSlide build(const std::string& slide_id, const std::string& patient_id) {
    layout();
    rasterise();
    SyntheticSlide s;
    s.image.slide_id = slide_id;
    s.image.patient_id = patient_id;
    s.image.label = cancer_ ? 1 : 0;
    s.image.spacing_um = cfg_.spacing_um;
    s.image.rgb = paint();
    s.truth = truth_;
    s.regions = annotate(slide_id);
    std::array<double, 5> count{};
    for (std::uint8_t v : truth_.cells()) count[v] += 1;
    const double tissue = count[1] + count[2] + count[3] + count[4];
    s.fractions = {count[1] / tissue, (count[2] + count[4]) / tissue, count[3] / tissue,
                   count[4] / tissue};
    return s;
  }

 private:
  bool fits(Point c, double reach) const {
    if (distance(c, centre_) + reach + 8 > inner_radius_) return false;
    for (const auto& s : structures_)
      if (distance(c, s.centre) < reach + s.reach + 6) return false;
    if (zone_radius_ > 0 && distance(c, cluster_) < zone_radius_ + reach + 6) return false;
    return true;
  }

  void place(Truth kind, double rmin, double rmax, int vertices, double jitter) {
    for (int attempt = 0; attempt < 300; ++attempt) {
      const double r = uniform(rng_, rmin, rmax);
      const double a = uniform(rng_, 0, 2 * kPi);
      const double d = std::sqrt(uniform01(rng_)) * inner_radius_;
      const Point c{centre_.x + d * std::cos(a), centre_.y + d * std::sin(a)};
      const double reach = r * (1 + jitter);
      if (!fits(c, reach)) continue;
      structures_.push_back({c, reach, star(rng_, c, r, vertices, jitter), kind});
      return;
    }
  }

  void place_cluster(bool tumour) {
    const double rc = uniform(rng_, 18, 24);
    const double w = tumour ? uniform(rng_, 16, 22) : 0.0;
    const double zone = rc + (tumour ? w : 4.0);
    const double limit = inner_radius_ - zone - 8;
    if (limit <= 0) return;
    const double a = uniform(rng_, 0, 2 * kPi);
    const double d = std::sqrt(uniform01(rng_)) * limit;
    cluster_ = {centre_.x + d * std::cos(a), centre_.y + d * std::sin(a)};
    cluster_radius_ = rc;
    zone_radius_ = zone;
    tumour_zone_ = tumour;
    const int want = 4 + static_cast<int>(uniform_index(rng_, 4));
    int placed = 0;
    for (int attempt = 0; attempt < 400 && placed < want; ++attempt) {
      const double r = uniform(rng_, 4, 7);
      const double reach = r * 1.15;
      const double rr = std::sqrt(uniform01(rng_)) * (rc - reach);
      const double aa = uniform(rng_, 0, 2 * kPi);
      const Point c{cluster_.x + rr * std::cos(aa), cluster_.y + rr * std::sin(aa)};
      bool ok = true;
      for (const auto& s : cluster_ducts_)
        if (distance(c, s.centre) < reach + s.reach + 3) ok = false;
      if (!ok) continue;
      cluster_ducts_.push_back({c, reach, star(rng_, c, r, 12, 0.15), Truth::epithelium});
      ++placed;
    }
  }

  void layout() {
    centre_ = {n_ / 2.0, n_ / 2.0};
    const double scale = n_ / 256.0;
    const double base = uniform(rng_, 100, 114) * scale;
    tissue_ = star(rng_, centre_, base, 28, 0.07);
    inner_radius_ = base * 0.93;
    if (cancer_)
      place_cluster(true);
    else if (uniform01(rng_) < cfg_.benign_cluster_prob)
      place_cluster(false);
    const int ducts = cancer_ ? 3 + static_cast<int>(uniform_index(rng_, 4))
                              : 6 + static_cast<int>(uniform_index(rng_, 4));
    for (int i = 0; i < ducts; ++i) place(Truth::epithelium, 9 * scale, 15 * scale, 16, 0.15);
    const int fat = 2 + static_cast<int>(uniform_index(rng_, 3));
    for (int i = 0; i < fat; ++i) place(Truth::fat, 12 * scale, 20 * scale, 18, 0.12);
  }

  void rasterise() {
    auto fill = [&](const Polygon& p, Truth t) {
      for_each_pixel(p, n_, n_, [&](int x, int y) { truth_.at(y, x) = static_cast<std::uint8_t>(t); });
    };
    fill(tissue_, Truth::normal_stroma);
    if (tumour_zone_)
      for (int y = 0; y < n_; ++y)
        for (int x = 0; x < n_; ++x)
          if (truth_.at(y, x) == static_cast<std::uint8_t>(Truth::normal_stroma) &&
              distance({x + 0.5, y + 0.5}, cluster_) < zone_radius_)
            truth_.at(y, x) = static_cast<std::uint8_t>(Truth::tumor_stroma);
    for (const auto& s : structures_) fill(s.polygon, s.kind);
    for (const auto& s : cluster_ducts_) fill(s.polygon, s.kind);
  }

  RgbImage paint() {
    const double amp = cfg_.texture_amplitude;
    Grid<float> tex = smooth_noise(rng_, n_, 1.5);
    Grid<float> fine = smooth_noise(rng_, n_, 0.7);
    const double lambda = uniform(rng_, 5, 7);
    const double phase = uniform(rng_, 0, 2 * kPi);
    const double hue_shift = uniform(rng_, -cfg_.hue_jitter_deg, cfg_.hue_jitter_deg);
    const double gain = uniform(rng_, 0.97, 1.03);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // nuclei: dark dots scattered over epithelium
    Mask nuclei(n_, n_);
    const int dots = static_cast<int>(0.25 * n_ * n_ / 6);
    for (int i = 0; i < dots; ++i) {
      const double cx = uniform(rng_, 0, n_), cy = uniform(rng_, 0, n_);
      const double r = uniform(rng_, 0.9, 1.5);
      for (int y = static_cast<int>(cy - 2); y <= static_cast<int>(cy + 2); ++y)
        for (int x = static_cast<int>(cx - 2); x <= static_cast<int>(cx + 2); ++x)
          if (nuclei.contains(y, x) && distance({x + 0.5, y + 0.5}, {cx, cy}) <= r)
            nuclei.at(y, x) = 1;
    }

    RgbImage img(n_, n_);
    for (int y = 0; y < n_; ++y)
      for (int x = 0; x < n_; ++x) {
        double rgb[3]{};
        const auto t = static_cast<Truth>(truth_.at(y, x));
        const double f = fine.at(y, x);
        switch (t) {
          case Truth::background: {
            const double v = 0.985 + 0.002 * gauss(rng_);
            for (double& c : rgb) c = v + 0.0005 * gauss(rng_);
            break;
          }
          case Truth::normal_stroma:
          case Truth::tumor_stroma: {
            double m = tex.at(y, x);
            if (t == Truth::tumor_stroma) {
              const double r = distance({x + 0.5, y + 0.5}, cluster_);
              m = std::sqrt(2.0) * std::sin(2 * kPi * r / lambda + phase) + 0.3 * f;
            }
            const double base[3] = {0.91, 0.62, 0.74};
            for (int c = 0; c < 3; ++c) rgb[c] = base[c] + amp * m + 0.012 * gauss(rng_);
            break;
          }
          case Truth::epithelium: {
            const double base[3] = {0.60, 0.40, 0.70};
            const double dark[3] = {0.32, 0.18, 0.48};
            for (int c = 0; c < 3; ++c)
              rgb[c] = (nuclei.at(y, x) ? dark[c] : base[c]) + 0.03 * f + 0.01 * gauss(rng_);
            break;
          }
          case Truth::fat: {
            const double base[3] = {0.94, 0.90, 0.78};
            for (int c = 0; c < 3; ++c) rgb[c] = base[c] + 0.012 * f;
            break;
          }
        }
        if (t != Truth::background) {
          Hsv h = rgb_to_hsv(rgb[0], rgb[1], rgb[2]);
          h.h += hue_shift;
          h.v *= gain;
          hsv_to_rgb(h, rgb[0], rgb[1], rgb[2]);
        }
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = static_cast<float>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255.0) / 255.0);
      }
    return img;
  }

  /// True when every pixel centre inside `p` carries one of `codes`; the
  /// polygon must also cover at least one pixel.
  bool pure(const Polygon& p, std::initializer_list<Truth> codes) const {
    bool ok = true;
    int count = 0;
    for_each_pixel(p, n_, n_, [&](int x, int y) {
      ++count;
      const auto v = static_cast<Truth>(truth_.at(y, x));
      if (std::find(codes.begin(), codes.end(), v) == codes.end()) ok = false;
    });
    // every pixel centre inside must also lie on the slide
    const PixelBox b = bounding_pixels(p);
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > n_ + 1 || b.y1 > n_ + 1) ok = false;
    return ok && count > 0;
  }

  void add_stroma(std::vector<AnnotatedRegion>& out, const std::string& id, const Polygon& p) const {
    if (!is_simple(p)) return;
    const bool normal = pure(p, {Truth::normal_stroma});
    const bool tumour = !normal && pure(p, {Truth::tumor_stroma});
    if (!normal && !tumour && !pure(p, {Truth::normal_stroma, Truth::tumor_stroma})) return;
    out.push_back({id, "stroma", p, Provenance::manual});
    if (normal) out.push_back({id, "normal_stroma", p, Provenance::manual});
    if (tumour) out.push_back({id, "tumor_stroma", p, Provenance::manual});
  }

  /// Bands hugging a star polygon, split into angular sectors.
  void ring_sectors(std::vector<AnnotatedRegion>& out, const std::string& id,
                    const Structure& s, double d0, double d1, int per_sector) const {
    const Polygon inner = offset_radially(s.polygon, s.centre, d0);
    const Polygon outer = offset_radially(s.polygon, s.centre, d1);
    const int n = static_cast<int>(s.polygon.size());
    for (int start = 0; start < n; start += per_sector) {
      Polygon p;
      for (int k = start; k <= start + per_sector; ++k) p.push_back(inner[k % n]);
      for (int k = start + per_sector; k >= start; --k) p.push_back(outer[k % n]);
      add_stroma(out, id, p);
    }
  }

  std::vector<AnnotatedRegion> annotate(const std::string& id) const {
    std::vector<AnnotatedRegion> out;
    auto add_structure = [&](const Structure& s) {
      if (pure(s.polygon, {s.kind}) && is_simple(s.polygon))
        out.push_back({id, s.kind == Truth::fat ? "fat" : "epithelium", s.polygon,
                       Provenance::manual});
    };
    for (const auto& s : structures_) add_structure(s);
    for (const auto& s : cluster_ducts_) add_structure(s);

    // stroma hugging every structure
    for (const auto& s : structures_) ring_sectors(out, id, s, 0.01, 6.0, 2);
    for (const auto& s : cluster_ducts_) ring_sectors(out, id, s, 0.01, 2.5, 3);
    // stroma along the tissue border
    Structure border{centre_, 0, tissue_, Truth::normal_stroma};
    ring_sectors(out, id, border, -7.0, -0.01, 2);

    // tumour annulus
    if (tumour_zone_) {
      const int sectors = 8, steps = 4;
      const double r_in = (cluster_radius_ + 1) / std::cos(kPi / (sectors * steps));
      const double r_out = zone_radius_ - 0.01;
      for (int s = 0; s < sectors; ++s) {
        Polygon p;
        for (int k = 0; k <= steps; ++k) {
          const double a = 2 * kPi * (s * steps + k) / (sectors * steps);
          p.push_back({cluster_.x + r_in * std::cos(a), cluster_.y + r_in * std::sin(a)});
        }
        for (int k = steps; k >= 0; --k) {
          const double a = 2 * kPi * (s * steps + k) / (sectors * steps);
          p.push_back({cluster_.x + r_out * std::cos(a), cluster_.y + r_out * std::sin(a)});
        }
        add_stroma(out, id, p);
      }
    }

    // square tiles over the remaining stroma
    const int tile = 12;
    const int ox = static_cast<int>(uniform_index(rng_, tile));
    const int oy = static_cast<int>(uniform_index(rng_, tile));
    for (int y = oy; y + tile <= n_; y += tile)
      for (int x = ox; x + tile <= n_; x += tile) {
        Polygon p{{double(x), double(y)}, {double(x + tile), double(y)},
                  {double(x + tile), double(y + tile)}, {double(x), double(y + tile)}};
        add_stroma(out, id, p);
      }
    return out;
  }

  const CorpusConfig& cfg_;
  Rng& rng_;
  bool cancer_;
  int n_;
  Grid<std::uint8_t> truth_;
  Point centre_;
  Polygon tissue_;
  double inner_radius_ = 0;
  std::vector<Structure> structures_;
  std::vector<Structure> cluster_ducts_;
  Point cluster_;
  double cluster_radius_ = 0;
  double zone_radius_ = 0;
  bool tumour_zone_ = false;
};

std::string slide_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%04d", i);
  return buf;
}

std::string patient_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%03d", i);
  return buf;
}

}  // namespace

SyntheticSlide generate_slide(const CorpusConfig& config, int index, bool cancer,
                              const std::string& slide_id, const std::string& patient_id) {
  if (config.size < 64 || config.size % 4 != 0) throw ConfigError("slide size must be a multiple of 4, >= 64");
  Rng rng = derive_rng(config.seed, 1000 + static_cast<std::uint64_t>(index));
  SlideBuilder b(config, rng, cancer);
  return b.build(slide_id, patient_id);
}

Corpus generate_corpus(const CorpusConfig& config, int threads) {
  if (config.n_benign < 0 || config.n_cancer < 0) throw ConfigError("slide counts must be >= 0");
  Rng rng = derive_rng(config.seed, 0);
  Corpus corpus;

  // patients, then a per-class split over patients
  struct Patient {
    std::string id;
    bool cancer;
    int slides;
  };
  std::vector<Patient> patients;
  for (bool cancer : {false, true}) {
    int left = cancer ? config.n_cancer : config.n_benign;
    while (left > 0) {
      const int k = std::min(left, 1 + static_cast<int>(uniform_index(rng, 3)));
      patients.push_back({patient_name(static_cast<int>(patients.size())), cancer, k});
      left -= k;
    }
  }
  const char* split_names[] = {"train", "validation", "test"};
  const double wsum = config.split_weights[0] + config.split_weights[1] + config.split_weights[2];
  std::vector<int> patient_split(patients.size());
  for (bool cancer : {false, true}) {
    std::vector<std::size_t> idx;
    int total = 0;
    for (std::size_t i = 0; i < patients.size(); ++i)
      if (patients[i].cancer == cancer) {
        idx.push_back(i);
        total += patients[i].slides;
      }
    std::shuffle(idx.begin(), idx.end(), rng);
    std::array<double, 3> have{};
    for (std::size_t i : idx) {
      // give the patient to the split furthest below its target share
      int best = 0;
      double best_gap = -1e300;
      for (int s = 0; s < 3; ++s) {
        const double gap = config.split_weights[s] / wsum * total - have[s];
        if (gap > best_gap) {
          best_gap = gap;
          best = s;
        }
      }
      patient_split[i] = best;
      have[best] += patients[i].slides;
    }
  }

  struct Job {
    int index;
    bool cancer;
    std::string slide, patient;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < patients.size(); ++p)
    for (int k = 0; k < patients[p].slides; ++k) {
      const int i = static_cast<int>(jobs.size());
      jobs.push_back({i, patients[p].cancer, slide_name(i), patients[p].id});
      corpus.manifest.push_back({slide_name(i), patients[p].id,
                                 patients[p].cancer ? "cancer" : "benign",
                                 split_names[patient_split[p]]});
    }
  corpus.slides.resize(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    corpus.slides[i] = generate_slide(config, j.index, j.cancer, j.slide, j.patient);
  });
  return corpus;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestRow>& rows) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.csv");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << "slide_id,patient_id,class,split\n";
  for (const auto& r : rows) out << r.slide_id << ',' << r.patient_id << ',' << r.label << ',' << r.split << '\n';
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  write_manifest(dir, corpus.manifest);
  for (const auto& s : corpus.slides) {
    const std::string& id = s.image.slide_id;
    io::write_rgb_png(dir / "slides" / (id + ".png"), s.image.rgb);
    io::write_palette_png(dir / "truth" / (id + ".png"), s.truth, kTruthPalette);
    write_annotations(dir / "annotations" / (id + ".json"), s.regions);
    nlohmann::json meta{{"slide_id", id},
                        {"patient_id", s.image.patient_id},
                        {"label", s.image.label == 1 ? "cancer" : "benign"},
                        {"spacing_um", s.image.spacing_um},
                        {"width", s.image.width()},
                        {"height", s.image.height()},
                        {"fractions",
                         {{"epithelium", s.fractions[0]},
                          {"stroma", s.fractions[1]},
                          {"fat", s.fractions[2]},
                          {"tumor_stroma", s.fractions[3]}}}};
    std::ofstream out(dir / "slides" / (id + ".json"));
    if (!out) throw IoError("cannot write sidecar for " + id);
    out << meta.dump(2) << '\n';
  }
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw IoError("missing " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(in, line);
  if (line != "slide_id,patient_id,class,split") throw IoError("unexpected manifest header");
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestRow r;
    std::getline(ss, r.slide_id, ',');
    std::getline(ss, r.patient_id, ',');
    std::getline(ss, r.label, ',');
    std::getline(ss, r.split, ',');
    if (r.label != "benign" && r.label != "cancer") throw IoError("bad class in manifest: " + line);
    if (r.split != "train" && r.split != "validation" && r.split != "test")
      throw IoError("bad split in manifest: " + line);
    rows.push_back(r);
  }
  return rows;
}

wsi::SlideImage load_slide(const std::filesystem::path& dir, const std::string& slide_id) {
  wsi::SlideImage s;
  s.rgb = io::read_rgb_png(dir / "slides" / (slide_id + ".png"));
  const auto meta_path = dir / "slides" / (slide_id + ".json");
  std::ifstream in(meta_path);
  if (!in) throw IoError("missing sidecar " + meta_path.string());
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    s.slide_id = j.at("slide_id").get<std::string>();
    s.patient_id = j.at("patient_id").get<std::string>();
    s.label = j.at("label").get<std::string>() == "cancer" ? 1 : 0;
    s.spacing_um = j.at("spacing_um").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(meta_path.string() + ": " + e.what());
  }
  if (!(s.spacing_um > 0)) throw IoError(meta_path.string() + ": spacing must be positive");
  return s;
}

Grid<std::uint8_t> load_truth(const std::filesystem::path& dir, const std::string& slide_id) {
  return io::read_index_png(dir / "truth" / (slide_id + ".png"));
}

std::vector<AnnotatedRegion> load_regions(const std::filesystem::path& dir,
                                          const std::string& slide_id) {
  return read_annotations(dir / "annotations" / (slide_id + ".json"));
}

wsi::LabelMap truth_label_map(const Grid<std::uint8_t>& truth, const wsi::MapGeometry& g) {
  wsi::LabelMap m;
  m.geometry = g;
  m.labels = Grid<std::uint8_t>(g.extent(truth.rows()), g.extent(truth.cols()));
  for (int i = 0; i < m.labels.rows(); ++i)
    for (int j = 0; j < m.labels.cols(); ++j)
      m.labels.at(i, j) = static_cast<std::uint8_t>(tissue_of(truth.at(g.centre(i), g.centre(j))));
  return m;
}

wsi::LikelihoodMap truth_likelihood_map(const Grid<std::uint8_t>& truth,
                                        const wsi::MapGeometry& g) {
  wsi::LikelihoodMap m;
  m.geometry = g;
  const int rows = g.extent(truth.rows()), cols = g.extent(truth.cols());
  m.values = Grid<float>(rows, cols);
  m.applicable = Mask(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const auto t = static_cast<Truth>(truth.at(g.centre(i), g.centre(j)));
      m.applicable.at(i, j) = t == Truth::normal_stroma || t == Truth::tumor_stroma;
      m.values.at(i, j) = t == Truth::tumor_stroma ? 1.0f : 0.0f;
    }
  return m;
}

geometry::FeatureVector oracle_features(const Grid<std::uint8_t>& truth,
                                        const wsi::MapGeometry& g, double threshold,
                                        const geometry::FeatureManifest& manifest) {
  return geometry::assemble_features(truth_label_map(truth, g), truth_likelihood_map(truth, g),
                                     threshold, manifest);
}

}  // namespace ssc::corpus
