#pragma once

#include "sylva/assets.hpp"
#include "sylva/dataset.hpp"
#include "sylva/harness.hpp"
#include "sylva/procgen.hpp"
#include "sylva/survey.hpp"
#include "sylva/voxel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sylva {

struct MeshAssetSource {
  std::filesystem::path mesh;
  std::filesystem::path descriptor;
};

/// Typed view of the JSON run configuration. `document` keeps the fully merged
/// tree (defaults + file + overrides) so it can be echoed into run reports.
struct PipelineConfig {
  std::uint64_t seed = 1;
  int workers = 1;

  struct Scene {
    std::string name = "scene";
    Rect extent = Rect::from_size(50.0, 50.0);
    double ground_elevation = 0.0;
    std::vector<FoliageGeneratorParams> generators;
    bool parametric_assets = true;
    int leaf_panels = 400;
    std::vector<MeshAssetSource> meshes;
    std::optional<std::uint64_t> seed;
  } scene;

  struct Voxel {
    double voxel_size = 0.1;
    OpacityTable opacity;
  } voxel;

  struct Survey {
    ScannerConfig scanner;
    FlightPattern flight_pattern = FlightPattern::criss_cross;
    double flight_spacing = 20.0;
    double flight_speed = 5.0;
    double relative_altitude = 60.0;
    std::optional<std::uint64_t> seed;
  } survey;

  struct Dataset {
    std::string name_prefix = "Sim";
    double tile_size = 50.0;
    std::array<double, 3> split{0.70, 0.15, 0.15};
    double density_threshold = 1000.0;
    std::filesystem::path output_dir = "out";
    std::vector<CloudFormat> formats{CloudFormat::binary};
    std::string semantic_mapping = "native";  // "native" or "binary"
    std::optional<std::uint64_t> seed;
  } dataset;

  struct Eval {
    double cylinder_radius = 8.0;
    double grid_stride = 11.0;
    double mix_fraction = 0.3;
    double iou_threshold = 0.5;
    MeanIouMode mean_iou = MeanIouMode::matched_only;
    std::optional<std::uint64_t> seed;
  } eval;

  nlohmann::json document;

  std::uint64_t scene_seed() const;
  std::uint64_t survey_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t eval_seed() const;

  /// Loads the built-in library or the configured meshes (ConfigError when a
  /// path is missing or an asset is malformed).
  AssetLibrary load_library() const;
  SemanticMapping mapping() const;

  /// Defaults as a JSON document; every accepted key appears here.
  static nlohmann::json defaults();
  /// Parses a merged document. Unknown keys and ill-typed values are
  /// ConfigErrors; relative paths resolve against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  /// Reads `path` (JSON), merges it over the defaults and applies overrides of
  /// the form {"survey.relative_altitude", "120"}; values parse as JSON when
  /// possible and as plain strings otherwise.
  static PipelineConfig load(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

/// Applies one dotted-path override to a document. Throws ConfigError for
/// keys that do not exist in the document.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

/// Environment variable naming the directory searched for relative config
/// paths and for the default `pipeline.json`.
inline constexpr const char* kConfigDirEnv = "SYLVA_CONFIG_DIR";

enum class Stage : int { generate = 1, voxelize = 2, plan = 3, survey = 4, dataset = 5 };
const char* to_string(Stage s);

/// Failure inside a pipeline stage, wrapping the original message.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what) : Error(what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct PipelineResult {
  DatasetManifest manifest;
  SurveyStats survey;
  nlohmann::json report;
};

/// generate_forest -> voxelize_scene -> plan_flight -> run_survey -> remap ->
/// tile -> split, writing scene.txt, cloud.bin / cloud.txt, plots/,
/// manifest.json and run_report.json under the output directory. Files
/// written by a failed run are removed again.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace sylva
