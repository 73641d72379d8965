#include "ssc/geometry/features.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ssc/geometry/regions.hpp"
#include "ssc/geometry/stats.hpp"

namespace ssc::geometry {

namespace {

const char* const kStats[] = {"mean", "std", "median", "iqr"};

void add_stats(FeatureManifest& m, const std::string& stem, const std::string& family,
               const std::string& source) {
  for (const char* s : kStats) m.features.push_back({stem + "_" + s, family, source, s});
}

FeatureManifest build_default() {
  FeatureManifest m;
  m.version = "ssc-features-1";
  const std::string a = "CNN_I", b = "CNN_II";
  for (const char* t : {"epithelium", "stroma", "fat"})
    m.features.push_back({std::string(t) + "_area_um2", "tissue_amount", a, "value"});
  for (const char* t : {"epithelium", "stroma", "fat"})
    m.features.push_back({std::string(t) + "_fraction", "tissue_amount", a, "value"});
  m.features.push_back({"epi_region_count", "count", a, "value"});
  add_stats(m, "epi_area_um2", "morphology", a);
  add_stats(m, "epi_eccentricity", "morphology", a);
  add_stats(m, "epi_delaunay_degree", "delaunay", a);
  add_stats(m, "epi_delaunay_distance_um", "delaunay", a);
  add_stats(m, "epi_zoi_area_um2", "voronoi", a);
  add_stats(m, "epi_zoi_ratio", "voronoi", a);

  m.features.push_back({"ts_area_um2", "tissue_amount", b, "value"});
  m.features.push_back({"ts_fraction_of_tissue", "tissue_amount", b, "value"});
  m.features.push_back({"ts_fraction_of_stroma", "tissue_amount", b, "value"});
  m.features.push_back({"ts_component_count", "count", b, "value"});
  add_stats(m, "ts_area_um2", "morphology", b);
  add_stats(m, "ts_eccentricity", "morphology", b);
  add_stats(m, "ts_delaunay_degree", "delaunay", b);
  add_stats(m, "ts_delaunay_distance_um", "delaunay", b);
  add_stats(m, "ts_zoi_area_um2", "voronoi", b);
  add_stats(m, "ts_zoi_ratio", "voronoi", b);
  add_stats(m, "ts_mean_likelihood", "likelihood", b);
  add_stats(m, "ts_max_likelihood", "likelihood", b);
  return m;
}

using Named = std::map<std::string, double>;

void put_stats(Named& out, const std::string& stem, const std::vector<double>& v) {
  const auto s = stats4(v).values();
  for (int i = 0; i < 4; ++i) out[stem + "_" + kStats[i]] = s[i];
}

void put_zero_stats(Named& out, const std::string& stem) {
  for (const char* s : kStats) out[stem + "_" + s] = 0.0;
}

/// Morphology, Delaunay and Voronoi statistics of one region family.
void region_block(Named& out, const std::string& prefix,
                  const std::vector<wsi::Component>& regions, const Mask& domain,
                  double cell_um) {
  std::vector<double> area, ecc;
  std::vector<Point> centroids;
  for (const auto& r : regions) {
    RegionProps p = region_props(r, cell_um);
    area.push_back(p.area_um2);
    ecc.push_back(p.eccentricity);
    centroids.push_back({p.centroid.x * cell_um, p.centroid.y * cell_um});
  }
  if (regions.empty()) {
    put_zero_stats(out, prefix + "_area_um2");
    put_zero_stats(out, prefix + "_eccentricity");
  } else {
    put_stats(out, prefix + "_area_um2", area);
    put_stats(out, prefix + "_eccentricity", ecc);
  }

  put_zero_stats(out, prefix + "_delaunay_degree");
  put_zero_stats(out, prefix + "_delaunay_distance_um");
  put_zero_stats(out, prefix + "_zoi_area_um2");
  put_zero_stats(out, prefix + "_zoi_ratio");
  if (regions.size() < 3) return;

  try {
    DelaunayGraph g = delaunay(centroids);
    const auto s = delaunay_stats(g);
    for (int i = 0; i < 4; ++i) {
      out[prefix + "_delaunay_degree_" + kStats[i]] = s[i];
      out[prefix + "_delaunay_distance_um_" + kStats[i]] = s[4 + i];
    }
  } catch (const DegenerateGeometry&) {
    // collinear centroids: keep the zero fallback
  }

  AreaVoronoi v = area_voronoi(regions, domain);
  std::vector<double> zoi, ratio;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    zoi.push_back(v.zoi_cells[i] * cell_um * cell_um);
    ratio.push_back(static_cast<double>(regions[i].size()) / v.zoi_cells[i]);
  }
  put_stats(out, prefix + "_zoi_area_um2", zoi);
  put_stats(out, prefix + "_zoi_ratio", ratio);
}

}  // namespace

const FeatureManifest& default_manifest() {
  static const FeatureManifest m = build_default();
  return m;
}

std::string manifest_to_json(const FeatureManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["features"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.features.size(); ++i) {
    const auto& f = m.features[i];
    j["features"].push_back({{"index", i},
                             {"name", f.name},
                             {"family", f.family},
                             {"source", f.source},
                             {"statistic", f.statistic}});
  }
  return j.dump(2);
}

FeatureManifest manifest_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    FeatureManifest m;
    m.version = j.at("version").get<std::string>();
    for (const auto& f : j.at("features"))
      m.features.push_back({f.at("name").get<std::string>(), f.at("family").get<std::string>(),
                            f.at("source").get<std::string>(),
                            f.at("statistic").get<std::string>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feature manifest: ") + e.what());
  }
}

FeatureManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

FeatureVector assemble_features(const wsi::LabelMap& cnn1, const wsi::LikelihoodMap& cnn2,
                                double threshold, const FeatureManifest& manifest) {
  if (!(cnn1.geometry == cnn2.geometry) || !cnn1.labels.same_shape(cnn2.values))
    throw ShapeError("assemble_features: maps are not aligned");
  const double cell_um = cnn1.geometry.cell_um();
  Named f;

  const auto amounts = tissue_amounts(cnn1);
  const char* names[] = {"epithelium_area_um2", "stroma_area_um2", "fat_area_um2",
                         "epithelium_fraction", "stroma_fraction", "fat_fraction"};
  for (int i = 0; i < 6; ++i) f[names[i]] = amounts[i];

  Mask domain(cnn1.labels.rows(), cnn1.labels.cols());
  Mask epi(domain.rows(), domain.cols());
  double tissue_cells = 0, stroma_cells = 0;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto v = static_cast<wsi::Tissue>(cnn1.labels[i]);
    domain[i] = v != wsi::Tissue::background;
    epi[i] = v == wsi::Tissue::epithelium;
    tissue_cells += domain[i];
    stroma_cells += v == wsi::Tissue::stroma;
  }
  const auto epi_regions = wsi::connected_components(epi);
  f["epi_region_count"] = static_cast<double>(epi_regions.size());
  region_block(f, "epi", epi_regions, domain, cell_um);

  const auto ts = wsi::connected_components(wsi::threshold_map(cnn2, threshold));
  if (ts.empty()) {
    for (const auto& d : default_manifest().features)
      if (d.source == "CNN_II") f[d.name] = 0.0;
  } else {
    double ts_cells = 0;
    std::vector<double> mean_l, max_l;
    for (const auto& comp : ts) {
      ts_cells += static_cast<double>(comp.size());
      double sum = 0, mx = 0;
      for (const auto& c : comp) {
        const double p = cnn2.values.at(c.row, c.col);
        sum += p;
        mx = std::max(mx, p);
      }
      mean_l.push_back(sum / static_cast<double>(comp.size()));
      max_l.push_back(mx);
    }
    f["ts_area_um2"] = ts_cells * cell_um * cell_um;
    f["ts_fraction_of_tissue"] = ts_cells / tissue_cells;
    f["ts_fraction_of_stroma"] = stroma_cells > 0 ? ts_cells / stroma_cells : 0.0;
    f["ts_component_count"] = static_cast<double>(ts.size());
    region_block(f, "ts", ts, domain, cell_um);
    put_stats(f, "ts_mean_likelihood", mean_l);
    put_stats(f, "ts_max_likelihood", max_l);
  }

  FeatureVector out;
  out.manifest_version = manifest.version;
  for (const auto& d : manifest.features) {
    auto it = f.find(d.name);
    if (it == f.end()) throw ConfigError("feature manifest names unknown feature " + d.name);
    out.names.push_back(d.name);
    out.values.push_back(it->second);
  }
  return out;
}

}  // namespace ssc::geometry
