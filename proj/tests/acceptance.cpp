// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include "sylva/harness.hpp"
#include "sylva/pipeline.hpp"
#include "sylva/random.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace sylva;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int n, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !o.pass;
  std::printf("criterion %2d %s: %s -- %s [%.1f s]\n", n, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SYLVA_CLI_PATH) + " " + args + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

const fs::path root = fs::temp_directory_path() / "sylva_acceptance";

fs::path write_config(const std::string& name, const json& patch) {
  const auto dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  json cfg = patch;
  cfg["dataset"]["output_dir"] = (dir / "out").string();
  std::ofstream(dir / "cfg.json") << cfg.dump(2);
  return dir;
}

// ---- procgen checks ---------------------------------------------------------

std::size_t collision_violations(const ForestScene& s) {
  std::size_t bad = 0;
  const auto& in = s.instances;
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = i + 1; j < in.size(); ++j) {
      const double need = s.generators[in[i].generator].collision_radius * in[i].scale +
                          s.generators[in[j].generator].collision_radius * in[j].scale;
      bad += (in[i].position - in[j].position).head<2>().norm() < need - 1e-9;
    }
  return bad;
}

// A shade-intolerant tree was a seedling when every strictly older survivor
// was already established, so none of them may shade its position.
std::size_t shade_violations(const ForestScene& s) {
  std::size_t bad = 0;
  for (const auto& t : s.instances) {
    if (s.generators[t.generator].can_grow_in_shade) continue;
    for (const auto& e : s.instances) {
      if (e.age <= t.age) continue;
      const double r = s.generators[e.generator].shade_radius * e.scale;
      bad += (e.position - t.position).head<2>().norm() < r;
    }
  }
  return bad;
}

std::size_t age_violations(const ForestScene& s) {
  std::size_t bad = 0;
  for (const auto& t : s.instances) bad += t.age > s.generators[t.generator].max_age;
  return bad;
}

// ---- exhaustive instance matcher -------------------------------------------

struct OracleResult {
  std::size_t tp = 0;
  double iou_sum = 0;
};

// Tries every one-to-one assignment; maximizes the number of pairs at or above
// the threshold, then their IoU sum.
OracleResult exhaustive_match(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt,
                              double threshold) {
  std::map<std::uint32_t, std::set<std::size_t>> P, G;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) P[pred[i]].insert(i);
    if (gt[i]) G[gt[i]].insert(i);
  }
  std::vector<std::set<std::size_t>> ps, gs;
  for (auto& [_, v] : P) ps.push_back(v);
  for (auto& [_, v] : G) gs.push_back(v);
  std::vector<std::vector<double>> iou(ps.size(), std::vector<double>(gs.size()));
  for (std::size_t a = 0; a < ps.size(); ++a)
    for (std::size_t b = 0; b < gs.size(); ++b) {
      std::size_t inter = 0;
      for (auto i : ps[a]) inter += gs[b].count(i);
      iou[a][b] = static_cast<double>(inter) / static_cast<double>(ps[a].size() + gs[b].size() - inter);
    }
  OracleResult best;
  std::vector<bool> used(gs.size(), false);
  std::function<void(std::size_t, OracleResult)> rec = [&](std::size_t a, OracleResult cur) {
    if (a == ps.size()) {
      if (cur.tp > best.tp || (cur.tp == best.tp && cur.iou_sum > best.iou_sum + 1e-12)) best = cur;
      return;
    }
    rec(a + 1, cur);
    for (std::size_t b = 0; b < gs.size(); ++b) {
      if (used[b] || iou[a][b] < threshold || iou[a][b] == 0) continue;
      used[b] = true;
      rec(a + 1, {cur.tp + 1, cur.iou_sum + iou[a][b]});
      used[b] = false;
    }
  };
  rec(0, {});
  return best;
}

std::vector<LidarPoint> labeled(const std::vector<std::uint32_t>& ids) {
  std::vector<LidarPoint> v(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) v[i].instance_id = ids[i];
  return v;
}

SegmentationResult prediction(const std::vector<std::uint32_t>& ids) {
  SegmentationResult r;
  r.instance = ids;
  r.semantic.assign(ids.size(), 0);
  return r;
}

}  // namespace

int main() {
  fs::create_directories(root);
  const auto table1 = std::vector{coniferous_overstory(), coniferous_understory()};

  criterion(1, "seeding arithmetic", [] {
    const auto ha = initial_seed_count(3.0, Rect::from_size(100, 100));
    const auto small = initial_seed_count(3.0, Rect::from_size(10, 10));
    GenerationLog log;
    auto g = coniferous_overstory();
    g.initial_seed_density = 3.0;
    g.num_steps = 1;
    generate_forest(Rect::from_size(100, 100), {g}, default_parametric_library(8), 1, &log);
    return Outcome{ha == 900 && small == 9 && log.initial_seeds == 900,
                   "1 ha: " + std::to_string(ha) + " (generated " + std::to_string(log.initial_seeds) +
                       "), 10 m x 10 m: " + std::to_string(small)};
  });

  criterion(2, "procgen invariants over 20 seeds on 1 ha", [&] {
    const auto lib = default_parametric_library(8);
    std::size_t col = 0, shade = 0, age = 0, trees = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto s = generate_forest(Rect::from_size(100, 100), table1, lib, seed);
      trees += s.instances.size();
      col += collision_violations(s);
      shade += shade_violations(s);
      age += age_violations(s);
    }
    return Outcome{col == 0 && shade == 0 && age == 0 && trees > 0,
                   std::to_string(trees) + " trees; violations: collision " + std::to_string(col) + ", shade " +
                       std::to_string(shade) + ", age " + std::to_string(age)};
  });

  // Default configuration over a 50 m x 50 m parametric forest.
  const auto run_a = write_config("run_a", json::object());
  const auto run_b = write_config("run_b", json::object());
  const auto run_c = write_config("run_c", json::object());

  criterion(3, "bitwise determinism across runs and worker counts", [&] {
    const int ca = run_cli("pipeline -c " + (run_a / "cfg.json").string() + " -j 1");
    const int cb = run_cli("pipeline -c " + (run_b / "cfg.json").string() + " -j 1");
    const int cc = run_cli("pipeline -c " + (run_c / "cfg.json").string() + " -j 8");
    if (ca || cb || cc)
      return Outcome{false, "pipeline exit codes " + std::to_string(ca) + "/" + std::to_string(cb) + "/" +
                                std::to_string(cc)};
    const auto cloud = slurp(run_a / "out" / "cloud.bin");
    const auto manifest = slurp(run_a / "out" / "manifest.json");
    bool same = !cloud.empty() && !manifest.empty();
    for (const auto& d : {run_b, run_c}) {
      same = same && slurp(d / "out" / "cloud.bin") == cloud;
      same = same && slurp(d / "out" / "manifest.json") == manifest;
      for (const auto& e : fs::directory_iterator(run_a / "out" / "plots"))
        same = same && slurp(e.path()) == slurp(d / "out" / "plots" / e.path().filename());
    }
    return Outcome{same, std::to_string(cloud.size()) + " cloud bytes; -j1, -j1, -j8 " +
                             (same ? "identical" : "differ")};
  });

  const auto config = PipelineConfig::load(run_a / "cfg.json");
  std::optional<PointCloud> cloud_a;
  std::optional<ForestScene> scene_a;
  auto load_run_a = [&] {
    if (!cloud_a) cloud_a = read_cloud(run_a / "out" / "cloud.bin");
    if (!scene_a) {
      std::ifstream in(run_a / "out" / "scene.txt");
      scene_a = read_scene(in);
    }
  };
  auto inside_density = [&](const PointCloud& c, const Rect& r) {
    return static_cast<double>(crop(c, r).size()) / r.area();
  };

  criterion(4, "density target and empty-terrain oracle", [&] {
    load_run_a();
    const double forest = inside_density(*cloud_a, scene_a->extent);

    ForestScene empty;
    empty.extent = Rect::from_size(100, 220);
    VoxelizeOptions opt;
    opt.voxel_size = config.voxel.voxel_size;
    opt.workers = 4;
    const auto grid = voxelize_scene(empty, config.load_library(), opt);
    FlightPlan plan;
    FlightLeg leg;
    leg.start = Vec2(-20, 110);
    leg.end = Vec2(120, 110);
    leg.altitude = config.survey.relative_altitude;
    leg.speed = config.survey.flight_speed;
    plan.legs = {leg};
    const auto& sc = config.survey.scanner;
    const auto r = run_survey(grid, plan, sc, config.survey_seed(), 4);
    const double oracle = swath_density(sc, leg);
    const double swath = sc.pulse_frequency / (leg.speed * oracle);
    // Full swath width under the middle half of the leg, away from its ends.
    const Rect band{Vec2(25, 110 - swath / 2), Vec2(75, 110 + swath / 2)};
    const double measured = inside_density(r.cloud, band);
    const double rel = std::abs(measured - oracle) / oracle;
    return Outcome{forest > 1000 && rel <= 0.30,
                   fmt("forest mean %.1f pts/m2; empty-terrain band %.2f vs oracle %.2f", forest, measured, oracle) +
                       fmt(" (%.1f%% off)", 100 * rel)};
  });

  criterion(5, "multi-return contract", [&] {
    load_run_a();
    std::size_t bad = 0, pulses = 0;
    int max_seen = 0;
    const auto& pts = cloud_a->points;
    for (std::size_t i = 0; i < pts.size();) {
      std::size_t j = i;
      while (j < pts.size() && pts[j].pulse_index == pts[i].pulse_index) {
        if (pts[j].return_number != j - i + 1) ++bad;
        ++j;
      }
      ++pulses;
      max_seen = std::max<int>(max_seen, static_cast<int>(j - i));
      if (j - i > 15) ++bad;
      if (i > 0 && pts[i].pulse_index <= pts[i - 1].pulse_index) ++bad;
      i = j;
    }
    return Outcome{bad == 0 && pulses > 0,
                   std::to_string(pulses) + " pulses with returns, max " + std::to_string(max_seen) + ", " +
                       std::to_string(bad) + " violations"};
  });

  criterion(6, "label fidelity of 1e5 sampled points", [&] {
    load_run_a();
    VoxelizeOptions opt;
    opt.voxel_size = config.voxel.voxel_size;
    opt.opacity = config.voxel.opacity;
    opt.workers = 4;
    const auto grid = voxelize_scene(*scene_a, config.load_library(), opt);
    const auto& v = config.survey;
    auto plan = plan_flight(scene_a->extent, v.flight_spacing, v.relative_altitude, v.flight_speed, v.flight_pattern);
    plan.ground_elevation = config.scene.ground_elevation;
    const PulseSchedule schedule(plan, v.scanner);
    const CounterRng rng(2024);
    const auto& pts = cloud_a->points;
    std::size_t bad = 0;
    double worst = 0;
    for (std::uint64_t k = 0; k < 100000; ++k) {
      const auto& p = pts[rng.below(k, pts.size())];
      const VoxelAttr* a = grid.find(grid.index_of(p.position));
      if (!a || a->instance_id != p.instance_id || static_cast<std::uint8_t>(a->semantic) != p.semantic) {
        ++bad;
        continue;
      }
      const Pulse pulse = schedule.at(p.pulse_index);
      const Vec3 d = p.position - pulse.origin;
      const double off = (d - d.dot(pulse.direction) * pulse.direction).norm();
      worst = std::max(worst, off);
      bad += off >= 1e-6 || d.dot(pulse.direction) <= 0;
    }
    return Outcome{bad == 0, std::to_string(bad) + " mismatches; max ray offset " + fmt("%.2e m", worst)};
  });

  criterion(7, "250 m x 250 m tiles to 25 plots split 17/4/4", [&] {
    const auto dir = write_config("run_250", {{"scene", {{"extent", {0, 0, 250, 250}}, {"assets", {{"leaf_panels", 100}}}}},
                                              {"voxel", {{"voxel_size", 0.25}}},
                                              {"survey", {{"pulse_frequency", 4000}}}});
    const int code = run_cli("pipeline -c " + (dir / "cfg.json").string() + " -j 8");
    if (code) return Outcome{false, "pipeline exit code " + std::to_string(code)};
    const auto m = DatasetManifest::read(dir / "out" / "manifest.json");
    const auto c = m.counts();
    std::set<std::string> ids;
    for (const auto& e : m.plots) ids.insert(e.plot_id);
    return Outcome{m.plots.size() == 25 && ids.size() == 25 && c.train == 17 && c.val == 4 && c.test == 4,
                   m.name + ": " + std::to_string(m.plots.size()) + " plots, " + std::to_string(c.train) + "/" +
                       std::to_string(c.val) + "/" + std::to_string(c.test)};
  });

  criterion(8, "nodal baseline is at least 5x sparser", [&] {
    load_run_a();
    const auto nodal = extract_nodal(*scene_a, config.load_library());
    const double dn = inside_density(nodal, scene_a->extent);
    const double ds = inside_density(*cloud_a, scene_a->extent);
    return Outcome{dn * 5 <= ds, fmt("nodal %.1f vs simulated %.1f pts/m2 (ratio %.1f)", dn, ds, ds / dn)};
  });

  criterion(9, "instance metrics oracle", [] {
    std::size_t bad = 0;
    for (std::uint64_t c = 0; c < 1000; ++c) {
      const CounterRng r(c, {9});
      const std::size_t n = 4 + r.below(0, 30);
      const std::uint64_t kp = 1 + r.below(1, 5), kg = 1 + r.below(2, 5);
      std::vector<std::uint32_t> pred(n), gt(n);
      for (std::size_t i = 0; i < n; ++i) {
        gt[i] = static_cast<std::uint32_t>(r.below(10 + 3 * i, kg + 1));
        pred[i] = r.uniform(11 + 3 * i) < 0.6 ? gt[i] : static_cast<std::uint32_t>(r.below(12 + 3 * i, kp + 1));
      }
      const auto oracle = exhaustive_match(pred, gt, 0.5);
      const auto m = evaluate_instances(prediction(pred), labeled(gt));
      const double np = static_cast<double>(m.pred_instances), ng = static_cast<double>(m.gt_instances);
      const double p = np ? 100.0 * oracle.tp / np : 0, rc = ng ? 100.0 * oracle.tp / ng : 0;
      const double f1 = p + rc > 0 ? 2 * p * rc / (p + rc) : 0;
      const double miou = oracle.tp ? 100.0 * oracle.iou_sum / oracle.tp : 0;
      if (np + ng == 0) continue;
      bad += m.true_positives != oracle.tp || std::abs(m.precision - p) > 1e-9 || std::abs(m.recall - rc) > 1e-9 ||
             std::abs(m.f1 - f1) > 1e-9 || std::abs(m.mean_iou - miou) > 1e-9;
    }
    const std::vector<std::uint32_t> perfect{0, 1, 1, 2, 2, 3, 3, 3};
    const auto pm = evaluate_instances(prediction(perfect), labeled(perfect));
    const bool perfect_ok = pm.precision == 100 && pm.recall == 100 && pm.f1 == 100 && pm.mean_iou == 100;
    const auto two = evaluate_instances(prediction({5, 5, 5, 5}), labeled({1, 1, 2, 2}));
    const bool two_ok = std::abs(two.precision - 100) <= 0.1 && std::abs(two.recall - 50) <= 0.1 &&
                        std::abs(two.f1 - 66.7) <= 0.1;
    return Outcome{bad == 0 && perfect_ok && two_ok,
                   std::to_string(bad) + " oracle mismatches in 1000 cases; perfect " + (perfect_ok ? "ok" : "wrong") +
                       fmt("; two-instance P/R/F1 %.1f/%.1f/%.1f", two.precision, two.recall, two.f1)};
  });

  criterion(10, "tree mix contract over 100 seeded mixes", [&] {
    load_run_a();
    const auto plots = tile(crop(*cloud_a, scene_a->extent), config.dataset.tile_size, scene_a->name);
    std::vector<CylinderSample> samples;
    for (const auto& p : plots)
      for (auto& s : sample_cylinders_grid(p, config.eval.cylinder_radius, config.eval.grid_stride))
        if (!instance_ids(s.points).empty()) samples.push_back(std::move(s));
    if (samples.size() < 2) return Outcome{false, "not enough cylinder samples"};
    std::size_t mixes = 0, bad = 0;
    for (std::uint64_t seed = 0; mixes < 100 && seed < 10000; ++seed) {
      const auto& a = samples[seed % samples.size()];
      const auto& b = samples[(seed * 7 + 3) % samples.size()];
      const auto a_ids = instance_ids(a.points);
      const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.3 * a_ids.size())));
      if (&a == &b || instance_ids(b.points).size() < k) continue;
      const auto r = tree_mix(a, b, 0.3, seed);
      ++mixes;
      std::set<std::uint32_t> kept(a_ids.begin(), a_ids.end());
      for (auto id : r.removed) bad += kept.erase(id) != 1;
      std::set<std::uint32_t> fresh(r.inserted.begin(), r.inserted.end());
      bad += r.removed.size() != k || r.donors.size() != k || fresh.size() != k;
      for (auto id : fresh) bad += kept.count(id) + std::count(a_ids.begin(), a_ids.end(), id);
      for (auto id : instance_ids(r.sample.points)) bad += !kept.count(id) && !fresh.count(id);
      std::vector<LidarPoint> ga, gr;
      for (const auto& p : a.points)
        if (p.instance_id == 0) ga.push_back(p);
      for (const auto& p : r.sample.points)
        if (p.instance_id == 0) gr.push_back(p);
      bad += ga != gr;
    }
    return Outcome{mixes == 100 && bad == 0,
                   std::to_string(mixes) + " mixes from " + std::to_string(samples.size()) + " samples, " +
                       std::to_string(bad) + " violations"};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  if (!failures) fs::remove_all(root);
  return failures ? 1 : 0;
}
