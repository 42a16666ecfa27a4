#include "sylva/procgen.hpp"

#include "sylva/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace sylva {

namespace {

// Random-stream purposes; part of the documented key path
// (scene seed, step, purpose, ordinal).
enum Purpose : std::uint64_t { kSpawn = 1, kAssign = 2, kSpread = 3 };

/// Uniform bucket grid over ground positions for fixed-radius neighbor queries.
class NeighborGrid {
 public:
  explicit NeighborGrid(double cell) : cell_(std::max(cell, 1e-6)) {}

  void insert(std::size_t index, const Vec2& p) { cells_[key(cell_of(p.x()), cell_of(p.y()))].push_back(index); }

  template <typename Fn>
  void for_each_near(const Vec2& p, double radius, Fn&& fn) const {
    const auto reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const std::int64_t cx = cell_of(p.x()), cy = cell_of(p.y());
    for (std::int64_t dx = -reach; dx <= reach; ++dx)
      for (std::int64_t dy = -reach; dy <= reach; ++dy) {
        const auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (auto idx : it->second)
          if (!fn(idx)) return;
      }
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xFFFFFFFFULL);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

double scaled_collision(const TreeInstance& t, const std::vector<FoliageGeneratorParams>& gens) {
  return gens[t.generator].collision_radius * t.scale;
}

void check_name(const std::string& s, const char* what) {
  if (s.empty() || std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }))
    throw ConfigError(std::string(what) + " '" + s + "' must be non-empty without whitespace");
}

}  // namespace

void FoliageGeneratorParams::validate() const {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("generator '" + name + "': " + what);
  };
  if (!(initial_seed_density >= 0)) fail("initial_seed_density must be >= 0");
  if (!(collision_radius > 0)) fail("collision_radius must be > 0");
  if (!(shade_radius >= 0)) fail("shade_radius must be >= 0");
  if (!(scale_min > 0 && scale_min <= scale_max)) fail("procedural_scale must satisfy 0 < min <= max");
  if (!(spread_variance >= 0)) fail("spread_variance must be >= 0");
  if (num_steps < 1) fail("num_steps must be >= 1");
  if (max_age < 1) fail("max_age must be >= 1");
  if (assets.empty()) fail("no assets listed");
  double total = 0;
  for (const auto& a : assets) {
    if (!(a.weight > 0)) fail("asset weight for '" + a.asset_id + "' must be > 0");
    total += a.weight;
  }
  if (!std::isfinite(total)) fail("asset weights must be finite");
}

FoliageGeneratorParams coniferous_overstory() {
  FoliageGeneratorParams g;
  g.name = "overstory";
  g.assets = {{"spruce_large", 2.0}, {"pine_large", 1.5}, {"beech_large", 1.0},
              {"spruce_medium", 1.0}, {"beech_medium", 0.5}};
  g.initial_seed_density = 3.0;
  g.collision_radius = 2.75;
  g.shade_radius = 4.5;
  g.scale_min = 0.8;
  g.scale_max = 1.2;
  g.average_spread_distance = 15.0;
  g.spread_variance = 5.0;
  g.num_steps = 2;
  g.max_age = 3;
  g.can_grow_in_shade = false;
  return g;
}

FoliageGeneratorParams coniferous_understory() {
  FoliageGeneratorParams g;
  g.name = "understory";
  g.assets = {{"spruce_sapling", 1.0}, {"hazel_sapling", 1.0}};
  g.initial_seed_density = 2.0;
  g.collision_radius = 0.75;
  g.shade_radius = 0.5;
  g.scale_min = 0.5;
  g.scale_max = 1.0;
  g.average_spread_distance = 8.0;
  g.spread_variance = 3.0;
  g.num_steps = 2;
  g.max_age = 2;
  g.can_grow_in_shade = true;
  return g;
}

double Terrain::height(const Vec2& p) const {
  if (flat()) return base;
  const double fx = std::clamp((p.x() - origin.x()) / cell, 0.0, static_cast<double>(nx - 1));
  const double fy = std::clamp((p.y() - origin.y()) / cell, 0.0, static_cast<double>(ny - 1));
  const int ix = std::min(static_cast<int>(fx), nx - 2 < 0 ? 0 : nx - 2);
  const int iy = std::min(static_cast<int>(fy), ny - 2 < 0 ? 0 : ny - 2);
  const int ix1 = std::min(ix + 1, nx - 1), iy1 = std::min(iy + 1, ny - 1);
  const double tx = fx - ix, ty = fy - iy;
  auto at = [&](int x, int y) { return heights[static_cast<std::size_t>(y) * nx + x]; };
  return base + (1 - ty) * ((1 - tx) * at(ix, iy) + tx * at(ix1, iy)) +
         ty * ((1 - tx) * at(ix, iy1) + tx * at(ix1, iy1));
}

std::size_t initial_seed_count(double initial_seed_density, const Rect& extent) {
  return static_cast<std::size_t>(
      std::llround(initial_seed_density * initial_seed_density * extent.area() / 100.0));
}

std::size_t prune_shade(std::vector<TreeInstance>& instances,
                        const std::vector<FoliageGeneratorParams>& generators) {
  double reach = 0;
  for (const auto& t : instances)
    if (t.age >= 1) reach = std::max(reach, generators[t.generator].shade_radius * t.scale);
  if (reach <= 0) return 0;

  NeighborGrid grid(reach);
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (instances[i].age >= 1) grid.insert(i, instances[i].position.head<2>());

  std::vector<char> doomed(instances.size(), 0);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& t = instances[i];
    if (t.age != 0 || generators[t.generator].can_grow_in_shade) continue;
    const Vec2 p = t.position.head<2>();
    grid.for_each_near(p, reach, [&](std::size_t j) {
      const auto& elder = instances[j];
      const double r = generators[elder.generator].shade_radius * elder.scale;
      if ((elder.position.head<2>() - p).norm() < r) {
        doomed[i] = 1;
        return false;
      }
      return true;
    });
  }
  std::size_t removed = 0;
  std::size_t w = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (doomed[i]) {
      ++removed;
      continue;
    }
    if (w != i) instances[w] = std::move(instances[i]);
    ++w;
  }
  instances.resize(w);
  return removed;
}

std::size_t prune_collisions(std::vector<TreeInstance>& instances,
                             const std::vector<FoliageGeneratorParams>& generators) {
  if (instances.empty()) return 0;
  // Winner order: larger scaled collision radius, then greater age, then smaller id.
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = instances[a];
    const auto& tb = instances[b];
    const double ra = scaled_collision(ta, generators), rb = scaled_collision(tb, generators);
    if (ra != rb) return ra > rb;
    if (ta.age != tb.age) return ta.age > tb.age;
    return ta.instance_id < tb.instance_id;
  });

  const double max_r = scaled_collision(instances[order.front()], generators);
  NeighborGrid grid(2.0 * max_r);
  std::vector<char> keep(instances.size(), 0);
  for (auto i : order) {
    const auto& t = instances[i];
    const Vec2 p = t.position.head<2>();
    const double r = scaled_collision(t, generators);
    bool clear = true;
    grid.for_each_near(p, r + max_r, [&](std::size_t j) {
      const double limit = r + scaled_collision(instances[j], generators);
      if ((instances[j].position.head<2>() - p).norm() < limit) {
        clear = false;
        return false;
      }
      return true;
    });
    if (clear) {
      keep[i] = 1;
      grid.insert(i, p);
    }
  }
  std::size_t w = 0;
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (keep[i]) {
      if (w != i) instances[w] = std::move(instances[i]);
      ++w;
    }
  const std::size_t removed = instances.size() - w;
  instances.resize(w);
  return removed;
}

ForestScene generate_forest(const Rect& extent, const std::vector<FoliageGeneratorParams>& generators,
                            const AssetLibrary& library, std::uint64_t rng_seed, GenerationLog* log,
                            const Terrain& terrain) {
  if (!(extent.area() > 0)) throw ValidationError("scene extent must have positive area");
  for (std::size_t g = 0; g < generators.size(); ++g) {
    generators[g].validate();
    check_name(generators[g].name, "generator name");
    for (std::size_t h = 0; h < g; ++h)
      if (generators[h].name == generators[g].name)
        throw ConfigError("duplicate generator name '" + generators[g].name + "'");
    for (const auto& a : generators[g].assets)
      if (!library.contains(a.asset_id))
        throw ConfigError("generator '" + generators[g].name + "' references unknown asset_id '" +
                          a.asset_id + "'");
  }

  ForestScene scene;
  scene.extent = extent;
  scene.terrain = terrain;
  scene.generators = generators;
  scene.rng_seed = rng_seed;
  GenerationLog local;
  GenerationLog& stats = log ? *log : local;
  stats = {};

  int total_steps = 0;
  for (const auto& g : generators) total_steps = std::max(total_steps, g.num_steps);

  std::uint32_t next_id = 1;
  auto& instances = scene.instances;
  const CounterRng assign_rng(rng_seed, {0, kAssign});

  auto create = [&](const Vec2& xy, std::uint32_t generator) {
    const auto& gen = generators[generator];
    TreeInstance t;
    t.instance_id = next_id++;
    t.generator = generator;
    t.position = Vec3(xy.x(), xy.y(), terrain.height(xy));
    const auto r = assign_rng.child(t.instance_id);
    t.scale = r.uniform(0, gen.scale_min, gen.scale_max);
    t.yaw = r.uniform(1, 0.0, 2.0 * std::numbers::pi);
    double total = 0;
    for (const auto& a : gen.assets) total += a.weight;
    double pick = r.uniform(2) * total;
    t.asset_id = gen.assets.back().asset_id;
    for (const auto& a : gen.assets) {
      if (pick < a.weight) {
        t.asset_id = a.asset_id;
        break;
      }
      pick -= a.weight;
    }
    t.age = 0;
    instances.push_back(std::move(t));
    ++stats.spawned;
  };

  for (int step = 0; step < total_steps; ++step) {
    const auto step_key = static_cast<std::uint64_t>(step);
    if (step == 0) {
      for (std::uint32_t g = 0; g < generators.size(); ++g) {
        const auto n = initial_seed_count(generators[g].initial_seed_density, extent);
        const CounterRng rng(rng_seed, {step_key, kSpawn, g});
        stats.initial_seeds += n;
        for (std::size_t i = 0; i < n; ++i) {
          const Vec2 xy(rng.uniform(2 * i, extent.min.x(), extent.max.x()),
                        rng.uniform(2 * i + 1, extent.min.y(), extent.max.y()));
          create(xy, g);
        }
      }
    } else {
      const CounterRng rng(rng_seed, {step_key, kSpread});
      const std::size_t parents = instances.size();
      for (std::size_t i = 0; i < parents; ++i) {
        const std::uint32_t generator = instances[i].generator;
        const auto& gen = generators[generator];
        if (step >= gen.num_steps) continue;
        const auto r = rng.child(instances[i].instance_id);
        const double dist = std::max(0.0, gen.average_spread_distance + gen.spread_variance * r.normal(0));
        const double angle = r.uniform(2, 0.0, 2.0 * std::numbers::pi);
        const Vec2 xy = instances[i].position.head<2>() + dist * Vec2(std::cos(angle), std::sin(angle));
        if (!extent.contains(xy)) continue;
        create(xy, generator);
      }
    }

    stats.shade_pruned += prune_shade(instances, generators);
    stats.collision_pruned += prune_collisions(instances, generators);

    std::size_t w = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      auto& t = instances[i];
      t.age += 1;
      if (t.age > generators[t.generator].max_age) {
        ++stats.aged_out;
        continue;
      }
      if (w != i) instances[w] = std::move(t);
      ++w;
    }
    instances.resize(w);
  }
  return scene;
}

std::vector<CompositionRow> scene_composition(const ForestScene& scene) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : scene.instances) ++counts[t.asset_id];
  std::vector<CompositionRow> rows;
  const double total = static_cast<double>(scene.instances.size());
  for (const auto& [id, n] : counts) rows.push_back({id, n, 100.0 * static_cast<double>(n) / total});
  return rows;
}

// Scene file: a header of keyword lines, then one instance per line.
//   # sylva-scene v1
//   name <name>
//   seed <u64>
//   extent <xmin> <ymin> <xmax> <ymax>
//   terrain flat <z> | terrain grid <base> <ox> <oy> <cell> <nx> <ny> <h...>
//   generator <one-line JSON parameter block>
//   instance <id> <asset> <x> <y> <z> <scale> <yaw> <age> <generator name>

namespace {

nlohmann::json to_json(const FoliageGeneratorParams& g) {
  nlohmann::json assets = nlohmann::json::array();
  for (const auto& a : g.assets) assets.push_back({{"asset_id", a.asset_id}, {"weight", a.weight}});
  return {{"name", g.name},
          {"assets", assets},
          {"initial_seed_density", g.initial_seed_density},
          {"collision_radius", g.collision_radius},
          {"shade_radius", g.shade_radius},
          {"procedural_scale", {g.scale_min, g.scale_max}},
          {"average_spread_distance", g.average_spread_distance},
          {"spread_variance", g.spread_variance},
          {"num_steps", g.num_steps},
          {"max_age", g.max_age},
          {"can_grow_in_shade", g.can_grow_in_shade}};
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FoliageGeneratorParams generator_from_json(const nlohmann::json& j) {
  FoliageGeneratorParams g;
  g.name = j.at("name").get<std::string>();
  for (const auto& a : j.at("assets")) {
    if (a.is_string()) {
      g.assets.push_back({a.get<std::string>(), 1.0});
    } else {
      g.assets.push_back({a.at("asset_id").get<std::string>(), a.value("weight", 1.0)});
    }
  }
  g.initial_seed_density = j.at("initial_seed_density").get<double>();
  g.collision_radius = j.at("collision_radius").get<double>();
  g.shade_radius = j.value("shade_radius", 0.0);
  if (j.contains("procedural_scale")) {
    g.scale_min = j.at("procedural_scale").at(0).get<double>();
    g.scale_max = j.at("procedural_scale").at(1).get<double>();
  }
  g.average_spread_distance = j.value("average_spread_distance", 0.0);
  g.spread_variance = j.value("spread_variance", 0.0);
  g.num_steps = j.value("num_steps", 1);
  g.max_age = j.value("max_age", 1);
  g.can_grow_in_shade = j.value("can_grow_in_shade", false);
  return g;
}

nlohmann::json generator_to_json(const FoliageGeneratorParams& g) { return to_json(g); }

void write_scene(std::ostream& out, const ForestScene& scene) {
  check_name(scene.name, "scene name");
  out << "# sylva-scene v1\n";
  out << "name " << scene.name << '\n';
  out << "seed " << scene.rng_seed << '\n';
  out << "extent " << fmt_double(scene.extent.min.x()) << ' ' << fmt_double(scene.extent.min.y()) << ' '
      << fmt_double(scene.extent.max.x()) << ' ' << fmt_double(scene.extent.max.y()) << '\n';
  const auto& tr = scene.terrain;
  if (tr.flat()) {
    out << "terrain flat " << fmt_double(tr.base) << '\n';
  } else {
    out << "terrain grid " << fmt_double(tr.base) << ' ' << fmt_double(tr.origin.x()) << ' '
        << fmt_double(tr.origin.y()) << ' ' << fmt_double(tr.cell) << ' ' << tr.nx << ' ' << tr.ny;
    for (double h : tr.heights) out << ' ' << fmt_double(h);
    out << '\n';
  }
  for (const auto& g : scene.generators) out << "generator " << to_json(g).dump() << '\n';
  for (const auto& t : scene.instances) {
    check_name(t.asset_id, "asset_id");
    out << "instance " << t.instance_id << ' ' << t.asset_id << ' ' << fmt_double(t.position.x()) << ' '
        << fmt_double(t.position.y()) << ' ' << fmt_double(t.position.z()) << ' ' << fmt_double(t.scale)
        << ' ' << fmt_double(t.yaw) << ' ' << t.age << ' ' << scene.generators.at(t.generator).name << '\n';
  }
}

ForestScene read_scene(std::istream& in) {
  ForestScene scene;
  scene.generators.clear();
  std::string line;
  std::uint64_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("# sylva-scene v1", 0) != 0) throw ParseError("missing '# sylva-scene v1' header", 1);
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw) || kw[0] == '#') continue;
    auto bad = [&](const std::string& what) { return ParseError("scene: " + what, line_no); };
    if (kw == "name") {
      if (!(ls >> scene.name)) throw bad("malformed name");
    } else if (kw == "seed") {
      if (!(ls >> scene.rng_seed)) throw bad("malformed seed");
    } else if (kw == "extent") {
      double a, b, c, d;
      if (!(ls >> a >> b >> c >> d)) throw bad("malformed extent");
      scene.extent = {Vec2(a, b), Vec2(c, d)};
    } else if (kw == "terrain") {
      std::string kind;
      ls >> kind;
      Terrain t;
      if (kind == "flat") {
        if (!(ls >> t.base)) throw bad("malformed flat terrain");
      } else if (kind == "grid") {
        double ox, oy;
        if (!(ls >> t.base >> ox >> oy >> t.cell >> t.nx >> t.ny) || t.nx < 1 || t.ny < 1 || !(t.cell > 0))
          throw bad("malformed terrain grid");
        t.origin = Vec2(ox, oy);
        t.heights.resize(static_cast<std::size_t>(t.nx) * t.ny);
        for (auto& h : t.heights)
          if (!(ls >> h)) throw bad("terrain grid is short of samples");
      } else {
        throw bad("unknown terrain kind '" + kind + "'");
      }
      scene.terrain = std::move(t);
    } else if (kw == "generator") {
      std::string rest;
      std::getline(ls, rest);
      try {
        scene.generators.push_back(generator_from_json(nlohmann::json::parse(rest)));
      } catch (const nlohmann::json::exception& e) {
        throw bad(std::string("bad generator block: ") + e.what());
      }
    } else if (kw == "instance") {
      TreeInstance t;
      double x, y, z;
      std::string gen;
      if (!(ls >> t.instance_id >> t.asset_id >> x >> y >> z >> t.scale >> t.yaw >> t.age >> gen))
        throw bad("malformed instance record");
      t.position = Vec3(x, y, z);
      const auto it = std::find_if(scene.generators.begin(), scene.generators.end(),
                                   [&](const auto& g) { return g.name == gen; });
      if (it == scene.generators.end()) throw bad("instance references unknown generator '" + gen + "'");
      t.generator = static_cast<std::uint32_t>(it - scene.generators.begin());
      scene.instances.push_back(std::move(t));
    } else {
      throw bad("unknown keyword '" + kw + "'");
    }
  }
  if (!header) throw ParseError("empty scene file", 0);
  return scene;
}

}  // namespace sylva
