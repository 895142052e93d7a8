#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "novsal/image.hpp"

namespace novsal {

// Steering label map: angle = kSteerPerCurvature * curvature + kSteerPerOffset * offset.
inline constexpr double kSteerPerCurvature = 50.0;  // rad * px
inline constexpr double kSteerPerOffset = 0.5;      // rad
inline constexpr std::size_t kSceneHeight = 60;
inline constexpr std::size_t kSceneWidth = 160;

/// Appearance of one synthetic driving world.
struct WorldSpec {
  char id = 'A';
  double background_low = 0.45;   // background intensity band
  double background_high = 0.55;
  double stripe_period = 40.0;    // background texture period, px
  double road_intensity = 0.5;
  double lane_width = 0.5;        // road width at the bottom row, fraction of image width
  double edge_intensity = 0.85;
  double edge_width = 2.0;        // px
  double texture_amplitude = 0.05;  // seeded per-pixel noise, uniform in +-amplitude
  std::size_t distractor_count = 0;   // label-independent hard-edged discs per scene
  double distractor_amplitude = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Flat mid-gray surroundings and road, bright lane markings.
WorldSpec world_a(std::uint64_t seed = 1);
/// Bright high-frequency checker background, dark wide road, dimmer edges.
WorldSpec world_b(std::uint64_t seed = 2);
WorldSpec world_by_id(char id, std::uint64_t seed);

struct SceneParams {
  double curvature = 0.0;  // 1/px
  double offset = 0.0;     // fraction of half-width
};

struct Scene {
  ImageBuf image;
  double angle = 0.0;
  SceneParams params;
};

double steering_angle(const SceneParams& p);

/// Horizontal positions of the left and right lane edges on row `row`.
std::pair<double, double> lane_edges(const WorldSpec& spec, const SceneParams& p, std::size_t row);

/// Renders a 60x160 scene. `scene_index` selects the texture-noise stream.
/// Requires |curvature| <= 0.01 and |offset| <= 0.4.
Scene gen_scene(const WorldSpec& spec, double curvature, double offset,
                std::uint64_t scene_index = 0);

/// 1 on pixels within `half_width` px of either lane edge, 0 elsewhere.
ImageBuf edge_band(const WorldSpec& spec, const SceneParams& p, double half_width = 2.0);

/// Deterministic scene parameters for index i of a dataset.
SceneParams sample_scene_params(const WorldSpec& spec, std::uint64_t index);

/// In-memory dataset of n scenes.
std::vector<Scene> gen_scenes(const WorldSpec& spec, std::size_t n);

struct GeneratedDataset {
  DatasetManifest manifest;
  std::vector<SceneParams> params;  // parallel to manifest.records
};

/// Writes scene_NNNNN.pgm files, manifest.csv, scenes.csv (path,curvature,offset)
/// and world.txt (appearance and label constants) into `dir`.
GeneratedDataset gen_dataset(const WorldSpec& spec, std::size_t n, const std::filesystem::path& dir);

/// Reads scenes.csv written by gen_dataset, keyed in manifest order.
std::vector<SceneParams> read_scene_params(const std::filesystem::path& csv);

/// Reads world.txt written by gen_dataset.
WorldSpec read_world_spec(const std::filesystem::path& path);

}  // namespace novsal
