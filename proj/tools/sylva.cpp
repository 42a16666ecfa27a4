// sylva: command-line front end for the synthetic forest LiDAR pipeline.
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 data/parse, 4 validation,
// 5 augmentation, 9 internal, 10 + stage for pipeline stage failures
// (11 generate, 12 voxelize, 13 plan, 14 survey, 15 dataset).

#include "sylva/dataset.hpp"
#include "sylva/harness.hpp"
#include "sylva/pipeline.hpp"
#include "sylva/pointcloud.hpp"
#include "sylva/procgen.hpp"
#include "sylva/survey.hpp"
#include "sylva/voxel.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sylva;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kData = 3,
  kValidation = 4,
  kAugmentation = 5,
  kInternal = 9,
  kStageBase = 10,
};

struct Common {
  std::optional<std::string> config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file (defaults to $SYLVA_CONFIG_DIR/pipeline.json)");
  cmd->add_option("-j,--workers", c.workers, "worker threads; outputs do not depend on it")->check(CLI::PositiveNumber);
  cmd->allow_extras();
}

// Leftover arguments are dotted overrides: --survey.relative_altitude 120 or
// --survey.relative_altitude=120.
std::vector<std::pair<std::string, std::string>> overrides_of(const CLI::App* cmd) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto rest = cmd->remaining();
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& a = rest[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    const std::string key = a.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
    } else {
      if (i + 1 >= rest.size()) throw ConfigError("override '" + a + "' needs a value");
      out.emplace_back(key, rest[++i]);
    }
  }
  return out;
}

PipelineConfig load_config(const CLI::App* cmd, const Common& c) {
  auto ov = overrides_of(cmd);
  if (c.workers) ov.emplace_back("workers", std::to_string(*c.workers));
  if (c.seed) ov.emplace_back("seed", std::to_string(*c.seed));
  return PipelineConfig::load(c.config ? std::optional<fs::path>(*c.config) : std::nullopt, ov);
}

ForestScene load_scene(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open scene " + p.string());
  return read_scene(in);
}

void save_scene(const fs::path& p, const ForestScene& s) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  write_scene(out, s);
}

CloudFormat format_of(const std::string& name) {
  if (name == "binary" || name == "bin") return CloudFormat::binary;
  if (name == "ascii" || name == "txt") return CloudFormat::ascii;
  throw ConfigError("unknown cloud format '" + name + "'");
}

CloudFormat format_for(const fs::path& p, const std::string& requested) {
  if (!requested.empty()) return format_of(requested);
  return p.extension() == ".txt" ? CloudFormat::ascii : CloudFormat::binary;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

json plan_json(const FlightPlan& plan) {
  json legs = json::array();
  for (const auto& l : plan.legs)
    legs.push_back({{"start", {l.start.x(), l.start.y()}},
                    {"end", {l.end.x(), l.end.y()}},
                    {"altitude", l.altitude},
                    {"speed", l.speed},
                    {"start_time", l.start_time}});
  return {{"pattern", to_string(plan.pattern)},
          {"spacing", plan.spacing},
          {"ground_elevation", plan.ground_elevation},
          {"duration_s", plan.duration()},
          {"legs", legs}};
}

json tiles_index(const std::vector<Plot>& plots, const std::string& ext) {
  json arr = json::array();
  for (const auto& p : plots)
    arr.push_back({{"scene", p.scene},
                   {"plot_id", p.id()},
                   {"tile", {p.tile_index[0], p.tile_index[1]}},
                   {"bounds", {p.bounds.min.x(), p.bounds.min.y(), p.bounds.max.x(), p.bounds.max.y()}},
                   {"points", p.cloud.size()},
                   {"density", p.density},
                   {"edge", p.edge},
                   {"file", "plots/" + p.id() + ext}});
  return {{"format", "sylva-tiles v1"}, {"plots", arr}};
}

std::vector<Plot> read_tiles(const fs::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw DataError("cannot open tile index " + index_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("tile index: ") + e.what(), e.byte);
  }
  std::vector<Plot> plots;
  try {
    for (const auto& e : j.at("plots")) {
      Plot p;
      p.scene = e.at("scene").get<std::string>();
      p.tile_index = {e.at("tile").at(0).get<int>(), e.at("tile").at(1).get<int>()};
      const auto b = e.at("bounds").get<std::vector<double>>();
      p.bounds = {Vec2(b.at(0), b.at(1)), Vec2(b.at(2), b.at(3))};
      p.edge = e.at("edge").get<bool>();
      p.cloud = read_cloud(index_path.parent_path() / e.at("file").get<std::string>());
      p.cloud.extent = p.bounds;
      p.density = static_cast<double>(p.cloud.size()) / p.bounds.area();
      plots.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed tile index: ") + e.what());
  }
  return plots;
}

void write_sample(const fs::path& stem, const CylinderSample& s, CloudFormat fmt) {
  PointCloud c;
  c.points = s.points;
  c.extent = {s.center - Vec2::Constant(s.radius), s.center + Vec2::Constant(s.radius)};
  write_cloud(fs::path(stem.string() + (fmt == CloudFormat::binary ? ".bin" : ".txt")), c, fmt);
  std::ofstream side(stem.string() + ".json", std::ios::trunc);
  side << s.sidecar().dump(2) << '\n';
}

CylinderSample read_sample(const fs::path& cloud_path) {
  CylinderSample s;
  s.points = read_cloud(cloud_path).points;
  fs::path side = cloud_path;
  side.replace_extension(".json");
  std::ifstream in(side);
  if (!in) throw DataError("missing sidecar " + side.string());
  try {
    const json j = json::parse(in);
    s.center = Vec2(j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>());
    s.radius = j.at("radius").get<double>();
    s.source_plot = j.value("source_plot", "");
  } catch (const json::exception& e) {
    throw DataError("sidecar " + side.string() + ": " + e.what());
  }
  return s;
}

Rect parse_rect(const std::vector<double>& v) {
  if (v.size() == 2) return Rect::from_size(v[0], v[1]);
  if (v.size() == 4) return {Vec2(v[0], v[1]), Vec2(v[2], v[3])};
  throw ConfigError("extent must be 'W D' or 'XMIN YMIN XMAX YMAX'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic forest LiDAR: scene generation, virtual survey and dataset tooling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sylva 0.1.0");

  // ---- pipeline
  Common pc;
  auto* pipeline = app.add_subcommand("pipeline", "run the full pipeline from one config");
  add_common(pipeline, pc);
  pipeline->add_option("--seed", pc.seed, "top-level seed");

  // ---- generate-scene
  Common gc;
  std::string gen_out = "scene.txt";
  auto* gen = app.add_subcommand("generate-scene", "procedurally place trees");
  add_common(gen, gc);
  gen->add_option("--seed", gc.seed, "top-level seed");
  gen->add_option("-o,--out", gen_out, "scene file");

  // ---- voxelize
  Common vc;
  std::string vox_scene, vox_out = "grid.svxg";
  auto* vox = app.add_subcommand("voxelize", "rasterize a scene into a labeled voxel grid");
  add_common(vox, vc);
  vox->add_option("--scene", vox_scene, "scene file")->required();
  vox->add_option("-o,--out", vox_out, "grid file");

  // ---- plan-flight
  Common fc;
  std::string plan_out;
  auto* planc = app.add_subcommand("plan-flight", "plan survey legs over the configured extent");
  add_common(planc, fc);
  planc->add_option("-o,--out", plan_out, "write the plan as JSON (stdout otherwise)");

  // ---- survey
  Common sc;
  std::string sv_grid, sv_out = "cloud.bin", sv_format;
  auto* surv = app.add_subcommand("survey", "fly the virtual scanner over a voxel grid");
  add_common(surv, sc);
  surv->add_option("--seed", sc.seed, "top-level seed");
  surv->add_option("--grid", sv_grid, "grid file")->required();
  surv->add_option("-o,--out", sv_out, "point cloud file");
  surv->add_option("--format", sv_format, "binary or ascii (default from extension)");

  // ---- tile
  std::string tl_cloud, tl_out = "tiles", tl_scene = "scene", tl_format = "binary";
  std::vector<double> tl_extent;
  double tl_size = 50.0;
  auto* tilec = app.add_subcommand("tile", "cut a cloud into square plots");
  tilec->add_option("--cloud", tl_cloud, "point cloud file")->required();
  tilec->add_option("-o,--out-dir", tl_out, "output directory (plots/ and tiles.json)");
  tilec->add_option("--tile-size", tl_size, "plot edge in meters")->check(CLI::PositiveNumber);
  tilec->add_option("--scene-name", tl_scene, "scene name used in plot ids");
  tilec->add_option("--extent", tl_extent, "W D or XMIN YMIN XMAX YMAX (default: point bounds)");
  tilec->add_option("--format", tl_format, "binary or ascii");

  // ---- split
  std::string sp_tiles, sp_out = "manifest.json", sp_prefix = "Sim";
  std::vector<double> sp_fractions{0.70, 0.15, 0.15};
  std::uint64_t sp_seed = 0;
  auto* splitc = app.add_subcommand("split", "assign plots to train/val/test");
  splitc->add_option("--tiles", sp_tiles, "tiles.json written by 'tile' (repeatable via several runs)")->required();
  splitc->add_option("-o,--out", sp_out, "manifest file");
  splitc->add_option("--seed", sp_seed, "shuffle seed");
  splitc->add_option("--fractions", sp_fractions, "train val test")->expected(3);
  splitc->add_option("--prefix", sp_prefix, "dataset name prefix");

  // ---- nodal
  Common nc;
  std::string nd_scene, nd_out = "nodal.bin", nd_format;
  auto* nodal = app.add_subcommand("nodal", "mesh-vertex point cloud (no-physics baseline)");
  add_common(nodal, nc);
  nodal->add_option("--scene", nd_scene, "scene file")->required();
  nodal->add_option("-o,--out", nd_out, "point cloud file");
  nodal->add_option("--format", nd_format, "binary or ascii (default from extension)");

  // ---- sample
  std::string sm_cloud, sm_out = "samples", sm_mode = "grid", sm_format = "binary";
  std::vector<double> sm_bounds;
  double sm_radius = 8.0, sm_stride = 11.0;
  std::size_t sm_count = 10;
  std::uint64_t sm_seed = 0;
  auto* sample = app.add_subcommand("sample", "cut cylinder samples from a plot");
  sample->add_option("--cloud", sm_cloud, "plot point cloud")->required();
  sample->add_option("-o,--out-dir", sm_out, "output directory");
  sample->add_option("--mode", sm_mode, "grid or random")->check(CLI::IsMember({"grid", "random"}));
  sample->add_option("--radius", sm_radius, "cylinder radius")->check(CLI::PositiveNumber);
  sample->add_option("--stride", sm_stride, "grid stride")->check(CLI::PositiveNumber);
  sample->add_option("--count", sm_count, "random sample count");
  sample->add_option("--seed", sm_seed, "random center seed");
  sample->add_option("--bounds", sm_bounds, "plot bounds XMIN YMIN XMAX YMAX (default: point bounds)");
  sample->add_option("--format", sm_format, "binary or ascii");

  // ---- mix
  std::string mx_a, mx_b, mx_out = "mixed";
  double mx_fraction = 0.3;
  std::uint64_t mx_seed = 0;
  auto* mix = app.add_subcommand("mix", "replace a fraction of trees in sample A with trees of sample B");
  mix->add_option("--a", mx_a, "sample A cloud (with .json sidecar)")->required();
  mix->add_option("--b", mx_b, "sample B cloud (with .json sidecar)")->required();
  mix->add_option("--fraction", mx_fraction, "fraction of A's trees to replace")->check(CLI::Range(0.0, 1.0));
  mix->add_option("--seed", mx_seed, "selection seed");
  mix->add_option("-o,--out", mx_out, "output stem (writes <stem>.bin and <stem>.json)");

  // ---- eval
  std::string ev_pred, ev_gt, ev_mode = "matched_only", ev_labels = "native";
  double ev_threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "instance and semantic metrics of a prediction");
  eval->add_option("--pred", ev_pred, "predicted cloud (labels carried per point)")->required();
  eval->add_option("--gt", ev_gt, "ground-truth cloud, same point order")->required();
  eval->add_option("--iou-threshold", ev_threshold, "match threshold");
  eval->add_option("--mean-iou", ev_mode, "matched_only or all_ground_truth")
      ->check(CLI::IsMember({"matched_only", "all_ground_truth"}));
  eval->add_option("--labels", ev_labels, "label set for names: native, binary, five_class")
      ->check(CLI::IsMember({"native", "binary", "five_class"}));

  // ---- stats
  std::string st_cloud, st_scene, st_manifest;
  std::vector<double> st_extent;
  double st_tile = 50.0, st_threshold = 1000.0;
  auto* stats = app.add_subcommand("stats", "density and composition tables");
  stats->add_option("--cloud", st_cloud, "point cloud to tile and measure");
  stats->add_option("--scene", st_scene, "scene file (composition table; extent for --cloud)");
  stats->add_option("--manifest", st_manifest, "dataset manifest");
  stats->add_option("--extent", st_extent, "W D or XMIN YMIN XMAX YMAX for --cloud");
  stats->add_option("--tile-size", st_tile, "plot edge for --cloud");
  stats->add_option("--threshold", st_threshold, "density flag threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (pipeline->parsed()) {
      const auto cfg = load_config(pipeline, pc);
      const auto r = run_pipeline(cfg);
      print({{"dataset", r.manifest.name},
             {"output_dir", cfg.dataset.output_dir.string()},
             {"plots", r.manifest.plots.size()},
             {"points", r.survey.point_count},
             {"mean_density", r.survey.mean_density},
             {"relative_altitude", cfg.survey.relative_altitude}});
    } else if (gen->parsed()) {
      const auto cfg = load_config(gen, gc);
      GenerationLog log;
      auto scene = generate_forest(cfg.scene.extent, cfg.scene.generators, cfg.load_library(), cfg.scene_seed(), &log,
                                   Terrain{.base = cfg.scene.ground_elevation});
      scene.name = cfg.scene.name;
      save_scene(gen_out, scene);
      print({{"scene", gen_out},
             {"instances", scene.instances.size()},
             {"seed", scene.rng_seed},
             {"initial_seeds", log.initial_seeds},
             {"spawned", log.spawned},
             {"shade_pruned", log.shade_pruned},
             {"collision_pruned", log.collision_pruned},
             {"aged_out", log.aged_out}});
    } else if (vox->parsed()) {
      const auto cfg = load_config(vox, vc);
      const auto scene = load_scene(vox_scene);
      VoxelizeOptions opt{cfg.voxel.voxel_size, cfg.voxel.opacity, cfg.workers};
      const auto grid = voxelize_scene(scene, cfg.load_library(), opt);
      std::ofstream out(vox_out, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + vox_out);
      write_grid(out, grid);
      print({{"grid", vox_out}, {"voxels", grid.size()}, {"voxel_size", grid.voxel_size()}});
    } else if (planc->parsed()) {
      const auto cfg = load_config(planc, fc);
      const auto& s = cfg.survey;
      auto plan = plan_flight(cfg.scene.extent, s.flight_spacing, s.relative_altitude, s.flight_speed,
                              s.flight_pattern);
      plan.ground_elevation = cfg.scene.ground_elevation;
      const json j = plan_json(plan);
      if (plan_out.empty()) {
        print(j);
      } else {
        std::ofstream(plan_out, std::ios::trunc) << j.dump(2) << '\n';
        print({{"plan", plan_out}, {"legs", plan.legs.size()}, {"duration_s", plan.duration()}});
      }
    } else if (surv->parsed()) {
      const auto cfg = load_config(surv, sc);
      std::ifstream in(sv_grid, std::ios::binary);
      if (!in) throw DataError("cannot open grid " + sv_grid);
      const auto grid = read_grid(in);
      const auto& s = cfg.survey;
      auto plan = plan_flight(grid.extent(), s.flight_spacing, s.relative_altitude, s.flight_speed, s.flight_pattern);
      plan.ground_elevation = cfg.scene.ground_elevation;
      const auto r = run_survey(grid, plan, s.scanner, cfg.survey_seed(), cfg.workers);
      write_cloud(fs::path(sv_out), r.cloud, format_for(sv_out, sv_format));
      print({{"cloud", sv_out},
             {"pulses", r.stats.pulse_count},
             {"points", r.stats.point_count},
             {"max_returns_observed", r.stats.max_returns_observed},
             {"area", r.stats.area},
             {"mean_density", r.stats.mean_density},
             {"survey_seed", cfg.survey_seed()}});
    } else if (tilec->parsed()) {
      auto cloud = read_cloud(fs::path(tl_cloud));
      if (!tl_extent.empty()) cloud = crop(cloud, parse_rect(tl_extent));
      const auto plots = tile(cloud, tl_size, tl_scene);
      const auto fmt = format_of(tl_format);
      const std::string ext = fmt == CloudFormat::binary ? ".bin" : ".txt";
      fs::create_directories(fs::path(tl_out) / "plots");
      for (const auto& p : plots) write_cloud(fs::path(tl_out) / "plots" / (p.id() + ext), p.cloud, fmt);
      std::ofstream(fs::path(tl_out) / "tiles.json", std::ios::trunc) << tiles_index(plots, ext).dump(2) << '\n';
      print({{"plots", plots.size()}, {"index", (fs::path(tl_out) / "tiles.json").string()}});
    } else if (splitc->parsed()) {
      const auto plots = read_tiles(sp_tiles);
      auto m = split(plots, {sp_fractions[0], sp_fractions[1], sp_fractions[2]}, sp_seed, sp_prefix);
      // Plot files stay where `tile` put them; store paths relative to the manifest.
      const auto rel = fs::relative(fs::absolute(sp_tiles).parent_path(), fs::absolute(sp_out).parent_path());
      json idx;
      {
        std::ifstream in(sp_tiles);
        idx = json::parse(in);
      }
      for (auto& e : m.plots)
        for (const auto& t : idx.at("plots"))
          if (t.at("plot_id") == e.plot_id) e.file = (rel / t.at("file").get<std::string>()).lexically_normal().string();
      m.write(sp_out);
      const auto c = m.counts();
      print({{"manifest", sp_out}, {"name", m.name}, {"train", c.train}, {"val", c.val}, {"test", c.test}});
    } else if (nodal->parsed()) {
      const auto cfg = load_config(nodal, nc);
      const auto scene = load_scene(nd_scene);
      const auto cloud = extract_nodal(scene, cfg.load_library());
      write_cloud(fs::path(nd_out), cloud, format_for(nd_out, nd_format));
      print({{"cloud", nd_out},
             {"points", cloud.size()},
             {"area", scene.extent.area()},
             {"mean_density", static_cast<double>(cloud.size()) / scene.extent.area()}});
    } else if (sample->parsed()) {
      Plot plot;
      plot.cloud = read_cloud(fs::path(sm_cloud));
      plot.bounds = sm_bounds.empty() ? plot.cloud.bounds() : parse_rect(sm_bounds);
      plot.scene = fs::path(sm_cloud).stem().string();
      const auto samples = sm_mode == "grid" ? sample_cylinders_grid(plot, sm_radius, sm_stride)
                                             : sample_cylinders_random(plot, sm_radius, sm_count, sm_seed);
      fs::create_directories(sm_out);
      const auto fmt = format_of(sm_format);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        auto s = samples[k];
        s.source_plot = plot.scene;
        char name[32];
        std::snprintf(name, sizeof name, "sample_%04zu", k);
        write_sample(fs::path(sm_out) / name, s, fmt);
      }
      print({{"samples", samples.size()}, {"out_dir", sm_out}});
    } else if (mix->parsed()) {
      const auto a = read_sample(mx_a), b = read_sample(mx_b);
      const auto r = tree_mix(a, b, mx_fraction, mx_seed);
      write_sample(mx_out, r.sample, CloudFormat::binary);
      print({{"sample", mx_out + ".bin"}, {"removed", r.removed}, {"donors", r.donors}, {"inserted", r.inserted}});
    } else if (eval->parsed()) {
      const auto pred = read_cloud(fs::path(ev_pred)), gt = read_cloud(fs::path(ev_gt));
      if (pred.size() != gt.size())
        throw ValidationError("prediction has " + std::to_string(pred.size()) + " points, ground truth " +
                              std::to_string(gt.size()));
      const auto seg = SegmentationResult::from_cloud(pred.points);
      InstanceEvalOptions opt;
      opt.iou_threshold = ev_threshold;
      opt.mean_iou = ev_mode == "matched_only" ? MeanIouMode::matched_only : MeanIouMode::all_ground_truth;
      const auto inst = evaluate_instances(seg, gt.points, opt);
      std::vector<std::uint8_t> gts;
      for (const auto& p : gt.points) gts.push_back(p.semantic);
      const LabelSet labels = ev_labels == "binary"       ? binary_labels()
                              : ev_labels == "five_class" ? forest_five_class_labels()
                                                          : native_labels();
      print({{"instance", inst.to_json()}, {"semantic", evaluate_semantics(seg.semantic, gts).to_json(&labels)}});
    } else if (stats->parsed()) {
      json out = json::object();
      std::optional<ForestScene> scene;
      if (!st_scene.empty()) {
        scene = load_scene(st_scene);
        json comp = json::array();
        for (const auto& r : scene_composition(*scene))
          comp.push_back({{"asset_id", r.asset_id}, {"count", r.count}, {"percentage", r.percentage}});
        out["composition"] = comp;
        out["instances"] = scene->instances.size();
      }
      auto density_json = [](const DensityReport& rep) {
        json plots = json::array(), scenes = json::array();
        for (const auto& r : rep.plots)
          plots.push_back({{"scene", r.scene}, {"plot_id", r.plot_id}, {"points", r.points}, {"area", r.area},
                           {"density", r.density}, {"below_threshold", r.below_threshold}});
        for (const auto& s : rep.scenes)
          scenes.push_back({{"scene", s.scene}, {"plots", s.plots}, {"mean_density", s.mean_density},
                            {"below_threshold", s.below_threshold}});
        return json{{"threshold", rep.threshold}, {"plots", plots}, {"scenes", scenes}};
      };
      if (!st_cloud.empty()) {
        auto cloud = read_cloud(fs::path(st_cloud));
        if (!st_extent.empty())
          cloud = crop(cloud, parse_rect(st_extent));
        else if (scene)
          cloud = crop(cloud, scene->extent);
        out["cloud"] = {{"points", cloud.size()},
                        {"area", cloud.extent.area()},
                        {"mean_density", static_cast<double>(cloud.size()) / cloud.extent.area()},
                        {"provenance", cloud.provenance == Provenance::nodal ? "nodal" : "simulated"}};
        const auto name = scene ? scene->name : fs::path(st_cloud).stem().string();
        out["density"] = density_json(density_report(tile(cloud, st_tile, name), st_threshold));
      }
      if (!st_manifest.empty()) {
        const auto m = DatasetManifest::read(st_manifest);
        const auto c = m.counts();
        out["manifest"] = {{"name", m.name}, {"train", c.train}, {"val", c.val}, {"test", c.test}};
        out["manifest_density"] = density_json(density_report(m, st_threshold));
      }
      if (out.empty()) throw ConfigError("stats needs at least one of --cloud, --scene, --manifest");
      print(out);
    }
    return kOk;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageBase + static_cast<int>(e.stage());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const AugmentationError& e) {
    std::cerr << "augmentation error: " << e.what() << '\n';
    return kAugmentation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
