#include "sylva/pipeline.hpp"

#include "sylva/random.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sylva {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json PipelineConfig::defaults() {
  return json::parse(R"({
    "seed": 1,
    "workers": 1,
    "scene": {
      "name": "scene",
      "extent": [0, 0, 50, 50],
      "ground_elevation": 0,
      "generators": ["coniferous_overstory", "coniferous_understory"],
      "assets": {"parametric": true, "leaf_panels": 400, "meshes": []},
      "seed": null
    },
    "voxel": {"voxel_size": 0.1, "wood_opacity": 1.0, "leaf_opacity": 0.35},
    "survey": {
      "pulse_frequency": 100000,
      "scan_line_rate": 100,
      "fov_half_angle": 60,
      "max_returns": 15,
      "max_range": 1000,
      "flight_pattern": "criss_cross",
      "flight_spacing": 20,
      "flight_speed": 5,
      "relative_altitude": 60,
      "seed": null
    },
    "dataset": {
      "name_prefix": "Sim",
      "tile_size": 50,
      "split": [0.70, 0.15, 0.15],
      "density_threshold": 1000,
      "output_dir": "out",
      "formats": ["binary"],
      "semantic_mapping": "native",
      "seed": null
    },
    "eval": {
      "cylinder_radius": 8,
      "grid_stride": 11,
      "mix_fraction": 0.3,
      "iou_threshold": 0.5,
      "mean_iou": "matched_only",
      "seed": null
    }
  })");
}

namespace {

// Objects in the defaults define the accepted keys; arrays and scalars are
// replaced wholesale.
void merge_checked(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object())
    throw ConfigError("config section '" + (where.empty() ? std::string("<root>") : where) + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    auto& slot = base[key];
    if (slot.is_object())
      merge_checked(slot, value, path);
    else
      slot = value;
  }
}

json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("malformed config key '" + dotted + "'");
    p += "/" + part;
  }
  return json::json_pointer(p);
}

const json& node_at(const json& doc, const std::string& dotted) {
  const auto ptr = pointer_of(dotted);
  if (!doc.contains(ptr)) throw ConfigError("missing config key '" + dotted + "'");
  return doc.at(ptr);
}

template <typename T>
T get(const json& doc, const std::string& dotted) {
  const json& node = node_at(doc, dotted);
  if constexpr (std::is_floating_point_v<T>) {
    if (!node.is_number()) throw ConfigError("config key '" + dotted + "' must be a number, got " + node.dump());
  } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!node.is_number_integer())
      throw ConfigError("config key '" + dotted + "' must be an integer, got " + node.dump());
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!node.is_boolean()) throw ConfigError("config key '" + dotted + "' must be true or false, got " + node.dump());
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!node.is_string()) throw ConfigError("config key '" + dotted + "' must be a string, got " + node.dump());
  }
  try {
    return node.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + dotted + "' has the wrong type (" + node.dump() + ")");
  }
}

std::optional<std::uint64_t> get_seed(const json& doc, const std::string& dotted) {
  const json& node = node_at(doc, dotted);
  if (node.is_null()) return std::nullopt;
  if (!node.is_number_unsigned() && !(node.is_number_integer() && node.get<std::int64_t>() >= 0))
    throw ConfigError("config key '" + dotted + "' must be a non-negative integer seed");
  return node.get<std::uint64_t>();
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value) {
  const auto ptr = pointer_of(dotted_key);
  if (!doc.contains(ptr)) throw ConfigError("unknown config key '" + dotted_key + "'");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  if (doc.at(ptr).is_object()) throw ConfigError("config key '" + dotted_key + "' is a section, not a value");
  doc[ptr] = parsed;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& input, const std::filesystem::path& base_dir) {
  json doc = defaults();
  merge_checked(doc, input, "");

  PipelineConfig c;
  c.document = doc;
  c.seed = get_seed(doc, "seed").value_or(0);
  if (doc.at("seed").is_null()) throw ConfigError("config key 'seed' must be set");
  c.workers = get<int>(doc, "workers");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");

  auto& s = c.scene;
  s.name = get<std::string>(doc, "scene.name");
  if (s.name.empty() || s.name.find_first_of(" \t\n/") != std::string::npos)
    throw ConfigError("scene.name must be non-empty without whitespace or '/'");
  const auto ext = get<std::vector<double>>(doc, "scene.extent");
  if (ext.size() == 2) {
    s.extent = Rect::from_size(ext[0], ext[1]);
  } else if (ext.size() == 4) {
    s.extent = {Vec2(ext[0], ext[1]), Vec2(ext[2], ext[3])};
  } else {
    throw ConfigError("scene.extent must be [width, depth] or [xmin, ymin, xmax, ymax]");
  }
  if (!(s.extent.width() > 0 && s.extent.depth() > 0)) throw ConfigError("scene.extent must have positive area");
  s.ground_elevation = get<double>(doc, "scene.ground_elevation");
  for (const auto& g : node_at(doc, "scene.generators")) {
    if (g.is_string()) {
      const auto name = g.get<std::string>();
      if (name == "coniferous_overstory")
        s.generators.push_back(coniferous_overstory());
      else if (name == "coniferous_understory")
        s.generators.push_back(coniferous_understory());
      else
        throw ConfigError("unknown built-in generator '" + name + "'");
    } else {
      try {
        s.generators.push_back(generator_from_json(g));
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad generator block: ") + e.what());
      }
    }
  }
  s.parametric_assets = get<bool>(doc, "scene.assets.parametric");
  s.leaf_panels = get<int>(doc, "scene.assets.leaf_panels");
  if (s.leaf_panels < 1) throw ConfigError("scene.assets.leaf_panels must be >= 1");
  for (const auto& m : node_at(doc, "scene.assets.meshes")) {
    if (!m.is_object() || !m.contains("mesh") || !m.contains("descriptor"))
      throw ConfigError("scene.assets.meshes entries need 'mesh' and 'descriptor' paths");
    MeshAssetSource src{resolve(m.at("mesh").get<std::string>(), base_dir),
                        resolve(m.at("descriptor").get<std::string>(), base_dir)};
    for (const auto& p : {src.mesh, src.descriptor})
      if (!fs::exists(p)) throw ConfigError("asset file not found: " + p.string());
    s.meshes.push_back(std::move(src));
  }
  s.seed = get_seed(doc, "scene.seed");

  c.voxel.voxel_size = get<double>(doc, "voxel.voxel_size");
  if (!(c.voxel.voxel_size > 0)) throw ConfigError("voxel.voxel_size must be > 0");
  c.voxel.opacity.wood = get<double>(doc, "voxel.wood_opacity");
  c.voxel.opacity.leaf = get<double>(doc, "voxel.leaf_opacity");
  for (double o : {c.voxel.opacity.wood, c.voxel.opacity.leaf})
    if (!(o > 0 && o <= 1)) throw ConfigError("voxel opacities must lie in (0, 1]");

  auto& v = c.survey;
  v.scanner.pulse_frequency = get<double>(doc, "survey.pulse_frequency");
  v.scanner.scan_line_rate = get<double>(doc, "survey.scan_line_rate");
  v.scanner.fov_half_angle = get<double>(doc, "survey.fov_half_angle");
  v.scanner.max_returns = get<int>(doc, "survey.max_returns");
  v.scanner.max_range = get<double>(doc, "survey.max_range");
  try {
    v.scanner.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("survey: ") + e.what());
  }
  v.flight_pattern = flight_pattern_from_string(get<std::string>(doc, "survey.flight_pattern"));
  v.flight_spacing = get<double>(doc, "survey.flight_spacing");
  v.flight_speed = get<double>(doc, "survey.flight_speed");
  v.relative_altitude = get<double>(doc, "survey.relative_altitude");
  if (!(v.flight_spacing > 0 && v.flight_speed > 0 && v.relative_altitude > 0))
    throw ConfigError("survey.flight_spacing, flight_speed and relative_altitude must be > 0");
  v.seed = get_seed(doc, "survey.seed");

  auto& d = c.dataset;
  d.name_prefix = get<std::string>(doc, "dataset.name_prefix");
  d.tile_size = get<double>(doc, "dataset.tile_size");
  if (!(d.tile_size > 0)) throw ConfigError("dataset.tile_size must be > 0");
  const auto fr = get<std::vector<double>>(doc, "dataset.split");
  if (fr.size() != 3) throw ConfigError("dataset.split must list three fractions");
  d.split = {fr[0], fr[1], fr[2]};
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9 || *std::min_element(fr.begin(), fr.end()) < 0)
    throw ConfigError("dataset.split fractions must be non-negative and sum to 1");
  d.density_threshold = get<double>(doc, "dataset.density_threshold");
  d.output_dir = resolve(get<std::string>(doc, "dataset.output_dir"), base_dir);
  d.formats.clear();
  for (const auto& f : get<std::vector<std::string>>(doc, "dataset.formats")) {
    if (f == "binary")
      d.formats.push_back(CloudFormat::binary);
    else if (f == "ascii")
      d.formats.push_back(CloudFormat::ascii);
    else
      throw ConfigError("unknown dataset format '" + f + "' (binary, ascii)");
  }
  if (d.formats.empty()) throw ConfigError("dataset.formats must not be empty");
  d.semantic_mapping = get<std::string>(doc, "dataset.semantic_mapping");
  if (d.semantic_mapping != "native" && d.semantic_mapping != "binary")
    throw ConfigError("dataset.semantic_mapping must be 'native' or 'binary'");
  d.seed = get_seed(doc, "dataset.seed");

  auto& e = c.eval;
  e.cylinder_radius = get<double>(doc, "eval.cylinder_radius");
  e.grid_stride = get<double>(doc, "eval.grid_stride");
  e.mix_fraction = get<double>(doc, "eval.mix_fraction");
  e.iou_threshold = get<double>(doc, "eval.iou_threshold");
  if (!(e.cylinder_radius > 0 && e.grid_stride > 0)) throw ConfigError("eval radii and strides must be > 0");
  if (!(e.mix_fraction >= 0 && e.mix_fraction <= 1)) throw ConfigError("eval.mix_fraction must lie in [0, 1]");
  const auto mode = get<std::string>(doc, "eval.mean_iou");
  if (mode == "matched_only")
    e.mean_iou = MeanIouMode::matched_only;
  else if (mode == "all_ground_truth")
    e.mean_iou = MeanIouMode::all_ground_truth;
  else
    throw ConfigError("eval.mean_iou must be 'matched_only' or 'all_ground_truth'");
  e.seed = get_seed(doc, "eval.seed");
  return c;
}

PipelineConfig PipelineConfig::load(const std::optional<std::filesystem::path>& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides) {
  const char* env = std::getenv(kConfigDirEnv);
  const fs::path env_dir = env ? fs::path(env) : fs::path();

  json user = json::object();
  fs::path base;
  std::optional<fs::path> file = path;
  if (!file && !env_dir.empty() && fs::exists(env_dir / "pipeline.json")) file = env_dir / "pipeline.json";
  if (file) {
    fs::path p = *file;
    if (!fs::exists(p) && p.is_relative() && !env_dir.empty() && fs::exists(env_dir / p)) p = env_dir / p;
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    try {
      user = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + p.string() + ": " + e.what());
    }
    base = p.parent_path();
  }
  json doc = defaults();
  merge_checked(doc, user, "");
  for (const auto& [k, v] : overrides) apply_override(doc, k, v);
  return from_json(doc, base);
}

std::uint64_t PipelineConfig::scene_seed() const { return scene.seed.value_or(derive_seed(seed, "scene")); }
std::uint64_t PipelineConfig::survey_seed() const { return survey.seed.value_or(derive_seed(seed, "survey")); }
std::uint64_t PipelineConfig::split_seed() const { return dataset.seed.value_or(derive_seed(seed, "split")); }
std::uint64_t PipelineConfig::eval_seed() const { return eval.seed.value_or(derive_seed(seed, "eval")); }

AssetLibrary PipelineConfig::load_library() const {
  AssetLibrary lib = scene.parametric_assets ? default_parametric_library(scene.leaf_panels) : AssetLibrary();
  for (const auto& src : scene.meshes) {
    try {
      auto meta = AssetDescriptor::read(src.descriptor);
      lib.add(load_asset(src.mesh, meta).asset);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("asset " + src.mesh.string() + ": " + e.what());
    }
  }
  return lib;
}

SemanticMapping PipelineConfig::mapping() const {
  return dataset.semantic_mapping == "binary" ? native_to_binary() : SemanticMapping::identity(native_labels());
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::generate: return "generate";
    case Stage::voxelize: return "voxelize";
    case Stage::plan: return "plan";
    case Stage::survey: return "survey";
    case Stage::dataset: return "dataset";
  }
  return "?";
}

namespace {

// Remembers what a run wrote so a failure can take it back.
class OutputTracker {
 public:
  explicit OutputTracker(fs::path root) : root_(std::move(root)) {}
  ~OutputTracker() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it)
      if (fs::is_empty(*it, ec)) fs::remove(*it, ec);
  }

  void dir(const fs::path& p) {
    std::vector<fs::path> fresh;
    for (fs::path q = p; !q.empty() && !fs::exists(q); q = q.parent_path()) fresh.push_back(q);
    fs::create_directories(p);
    dirs_.insert(dirs_.end(), fresh.rbegin(), fresh.rend());
  }
  fs::path file(const fs::path& rel) {
    files_.push_back(root_ / rel);
    return files_.back();
  }
  void commit() { committed_ = true; }

 private:
  fs::path root_;
  std::vector<fs::path> files_, dirs_;
  bool committed_ = false;
};

const char* extension(CloudFormat f) { return f == CloudFormat::binary ? ".bin" : ".txt"; }

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  using clock = std::chrono::steady_clock;
  const auto library = config.load_library();

  const fs::path out = config.dataset.output_dir;
  OutputTracker tracker(out);
  json timings = json::object();

  auto stage = [&](Stage s, auto&& fn) {
    const auto t0 = clock::now();
    try {
      auto r = fn();
      timings[to_string(s)] = std::chrono::duration<double>(clock::now() - t0).count();
      return r;
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(s, std::string(to_string(s)) + " stage failed: " + e.what());
    }
  };

  const auto& sc = config.scene;
  Terrain terrain;
  terrain.base = sc.ground_elevation;

  ForestScene scene = stage(Stage::generate, [&] {
    GenerationLog log;
    auto s = generate_forest(sc.extent, sc.generators, library, config.scene_seed(), &log, terrain);
    s.name = sc.name;
    return s;
  });

  const VoxelGrid grid = stage(Stage::voxelize, [&] {
    VoxelizeOptions opt;
    opt.voxel_size = config.voxel.voxel_size;
    opt.opacity = config.voxel.opacity;
    opt.workers = config.workers;
    return voxelize_scene(scene, library, opt);
  });

  const FlightPlan plan = stage(Stage::plan, [&] {
    const auto& v = config.survey;
    auto p = plan_flight(sc.extent, v.flight_spacing, v.relative_altitude, v.flight_speed, v.flight_pattern);
    p.ground_elevation = sc.ground_elevation;
    return p;
  });

  SurveyResult survey = stage(Stage::survey, [&] {
    return run_survey(grid, plan, config.survey.scanner, config.survey_seed(), config.workers);
  });

  PipelineResult result;
  result.survey = survey.stats;
  stage(Stage::dataset, [&] {
    tracker.dir(out / "plots");
    {
      std::ofstream f(tracker.file("scene.txt"), std::ios::trunc);
      write_scene(f, scene);
      if (!f) throw DataError("cannot write scene.txt");
    }
    PointCloud cloud = remap_semantics(survey.cloud, config.mapping());
    survey.cloud = {};
    for (auto fmt : config.dataset.formats)
      write_cloud(tracker.file(std::string("cloud") + extension(fmt)), cloud, fmt);

    const auto plots = tile(crop(cloud, sc.extent), config.dataset.tile_size, sc.name);
    cloud = {};
    result.manifest = split(plots, config.dataset.split, config.split_seed(), config.dataset.name_prefix, true);
    const auto labels = config.dataset.semantic_mapping == "binary" ? binary_labels() : native_labels();
    result.manifest.label_set = labels.name;
    result.manifest.labels = labels.labels;
    for (auto& entry : result.manifest.plots) {
      const auto& p = *std::find_if(plots.begin(), plots.end(), [&](const Plot& q) { return q.id() == entry.plot_id; });
      for (auto fmt : config.dataset.formats) write_cloud(tracker.file("plots/" + p.id() + extension(fmt)), p.cloud, fmt);
      entry.file = "plots/" + p.id() + extension(config.dataset.formats.front());
    }
    result.manifest.write(tracker.file("manifest.json"));

    const auto density = density_report(plots, config.dataset.density_threshold);
    json plot_rows = json::array();
    for (const auto& r : density.plots)
      plot_rows.push_back({{"plot_id", r.plot_id}, {"points", r.points}, {"density", r.density},
                           {"below_threshold", r.below_threshold}});
    json composition = json::array();
    for (const auto& r : scene_composition(scene))
      composition.push_back({{"asset_id", r.asset_id}, {"count", r.count}, {"percentage", r.percentage}});

    json& rep = result.report;
    rep["format"] = "sylva-run-report v1";
    rep["config"] = config.document;
    rep["seeds"] = {{"seed", config.seed},
                    {"scene", config.scene_seed()},
                    {"survey", config.survey_seed()},
                    {"split", config.split_seed()},
                    {"eval", config.eval_seed()}};
    rep["scene"] = {{"instances", scene.instances.size()}, {"composition", composition}};
    rep["voxels"] = grid.size();
    rep["flight"] = {{"legs", plan.legs.size()}, {"duration_s", plan.duration()}};
    rep["survey"] = {{"pulses", survey.stats.pulse_count},
                     {"points", survey.stats.point_count},
                     {"max_returns_observed", survey.stats.max_returns_observed},
                     {"area", survey.stats.area},
                     {"mean_density", survey.stats.mean_density}};
    rep["dataset"] = {{"name", result.manifest.name},
                      {"plots", result.manifest.plots.size()},
                      {"density_threshold", density.threshold},
                      {"mean_density", density.scenes.empty() ? 0.0 : density.scenes.front().mean_density},
                      {"plot_densities", plot_rows}};
    rep["timings_s"] = timings;
    return 0;
  });
  timings["dataset"] = timings.value("dataset", 0.0);
  result.report["timings_s"] = timings;
  {
    std::ofstream f(tracker.file("run_report.json"), std::ios::trunc);
    f << result.report.dump(2) << '\n';
    if (!f) throw StageError(Stage::dataset, "cannot write run_report.json");
  }
  tracker.commit();
  return result;
}

}  // namespace sylva
