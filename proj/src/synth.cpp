#include "novsal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "novsal/error.hpp"
#include "novsal/rng.hpp"

namespace novsal {

namespace {

// Sampling range used by gen_dataset; keeps both edges inside the frame.
constexpr double kMaxSampledCurvature = 0.008;
constexpr double kMaxSampledOffset = 0.3;

bool in_band(double v) { return v >= 0.0 && v <= 1.0; }

// 0 at the bottom row, 1 at the top row.
double depth(std::size_t row) {
  return static_cast<double>(kSceneHeight - 1 - row) / static_cast<double>(kSceneHeight - 1);
}

double background(const WorldSpec& spec, std::size_t row, std::size_t col) {
  const double w = 2.0 * std::numbers::pi / spec.stripe_period;
  const double t = 0.5 * (1.0 + std::sin(w * static_cast<double>(col)) *
                                    std::cos(w * static_cast<double>(row)));
  return spec.background_low + (spec.background_high - spec.background_low) * t;
}

}  // namespace

void WorldSpec::validate() const {
  if (!in_band(background_low) || !in_band(background_high) || background_low > background_high ||
      !in_band(road_intensity) || !in_band(edge_intensity)) {
    throw std::invalid_argument("WorldSpec: intensities must lie in [0,1]");
  }
  if (!(lane_width > 0.1 && lane_width < 0.9)) {
    throw std::invalid_argument("WorldSpec: lane width fraction must be in (0.1, 0.9)");
  }
  if (!(stripe_period > 0.0) || !(edge_width > 0.0)) {
    throw std::invalid_argument("WorldSpec: stripe period and edge width must be > 0");
  }
  if (!(texture_amplitude >= 0.0 && texture_amplitude <= 0.05)) {
    throw std::invalid_argument("WorldSpec: texture amplitude must be in [0, 0.05]");
  }
}

WorldSpec world_a(std::uint64_t seed) {
  WorldSpec s;
  s.id = 'A';
  s.seed = seed;
  return s;
}

WorldSpec world_b(std::uint64_t seed) {
  WorldSpec s;
  s.id = 'B';
  s.background_low = 0.55;
  s.background_high = 0.95;
  s.stripe_period = 6.0;
  s.road_intensity = 0.2;
  s.lane_width = 0.7;
  s.edge_intensity = 0.6;
  s.edge_width = 1.5;
  s.texture_amplitude = 0.03;
  s.seed = seed;
  return s;
}

WorldSpec world_by_id(char id, std::uint64_t seed) {
  switch (id) {
    case 'A':
    case 'a':
      return world_a(seed);
    case 'B':
    case 'b':
      return world_b(seed);
    default:
      throw UsageError(std::string("unknown world id '") + id + "' (expected A or B)");
  }
}

double steering_angle(const SceneParams& p) {
  return kSteerPerCurvature * p.curvature + kSteerPerOffset * p.offset;
}

std::pair<double, double> lane_edges(const WorldSpec& spec, const SceneParams& p, std::size_t row) {
  const double d = depth(row);
  const double ahead = static_cast<double>(kSceneHeight - 1 - row);
  const double center = 0.5 * static_cast<double>(kSceneWidth - 1) +
                        p.offset * 0.5 * static_cast<double>(kSceneWidth) +
                        p.curvature * ahead * ahead;
  const double half = spec.lane_width * 0.5 * static_cast<double>(kSceneWidth) * (1.0 - 0.6 * d);
  return {center - half, center + half};
}

Scene gen_scene(const WorldSpec& spec, double curvature, double offset, std::uint64_t scene_index) {
  spec.validate();
  if (!(std::abs(curvature) <= 0.01)) throw std::invalid_argument("gen_scene: |curvature| > 0.01");
  if (!(std::abs(offset) <= 0.4)) throw std::invalid_argument("gen_scene: |offset| > 0.4");

  Scene scene;
  scene.params = {curvature, offset};
  scene.angle = steering_angle(scene.params);
  scene.image = ImageBuf(kSceneHeight, kSceneWidth);
  Rng noise(mix_seed(mix_seed(spec.seed, 0x6e6f697365ULL), scene_index));
  // Hard-edged discs of random polarity: clutter with as much local contrast
  // as the lane markings but no bearing on the label.
  struct Blob {
    double row, col, radius, amplitude;
  };
  std::vector<Blob> blobs;
  Rng blob_rng(mix_seed(mix_seed(spec.seed, 0x626c6f62ULL), scene_index));
  for (std::size_t i = 0; i < spec.distractor_count; ++i) {
    Blob b;
    b.row = blob_rng.uniform(0.0, static_cast<double>(kSceneHeight));
    b.col = blob_rng.uniform(0.0, static_cast<double>(kSceneWidth));
    b.radius = blob_rng.uniform(3.0, 6.0);
    b.amplitude = blob_rng.uniform() < 0.5 ? -spec.distractor_amplitude : spec.distractor_amplitude;
    blobs.push_back(b);
  }
  for (std::size_t r = 0; r < kSceneHeight; ++r) {
    const auto [xl, xr] = lane_edges(spec, scene.params, r);
    for (std::size_t c = 0; c < kSceneWidth; ++c) {
      const double x = static_cast<double>(c);
      // Anti-aliased road coverage of the pixel [x-0.5, x+0.5].
      const double cover = std::clamp(std::min(x + 0.5 - xl, xr - (x - 0.5)), 0.0, 1.0);
      double bg = background(spec, r, c);
      for (const auto& b : blobs) {
        const double dr = static_cast<double>(r) - b.row, dc = x - b.col;
        bg += b.amplitude * std::clamp(b.radius + 0.5 - std::sqrt(dr * dr + dc * dc), 0.0, 1.0);
      }
      double v = cover * spec.road_intensity + (1.0 - cover) * std::clamp(bg, 0.0, 1.0);
      const double e = std::max(std::clamp(1.0 - std::abs(x - xl) / spec.edge_width, 0.0, 1.0),
                                std::clamp(1.0 - std::abs(x - xr) / spec.edge_width, 0.0, 1.0));
      v = v * (1.0 - e) + spec.edge_intensity * e;
      v += spec.texture_amplitude * noise.uniform(-1.0, 1.0);
      scene.image.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return scene;
}

ImageBuf edge_band(const WorldSpec& spec, const SceneParams& p, double half_width) {
  ImageBuf band(kSceneHeight, kSceneWidth);
  for (std::size_t r = 0; r < kSceneHeight; ++r) {
    const auto [xl, xr] = lane_edges(spec, p, r);
    for (std::size_t c = 0; c < kSceneWidth; ++c) {
      const double x = static_cast<double>(c);
      if (std::abs(x - xl) <= half_width || std::abs(x - xr) <= half_width) band.at(r, c) = 1.0;
    }
  }
  return band;
}

SceneParams sample_scene_params(const WorldSpec& spec, std::uint64_t index) {
  Rng rng(mix_seed(mix_seed(spec.seed, 0x7363656e65ULL), index));
  SceneParams p;
  p.curvature = rng.uniform(-kMaxSampledCurvature, kMaxSampledCurvature);
  p.offset = rng.uniform(-kMaxSampledOffset, kMaxSampledOffset);
  return p;
}

std::vector<Scene> gen_scenes(const WorldSpec& spec, std::size_t n) {
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SceneParams p = sample_scene_params(spec, i);
    scenes.push_back(gen_scene(spec, p.curvature, p.offset, i));
  }
  return scenes;
}

GeneratedDataset gen_dataset(const WorldSpec& spec, std::size_t n, const std::filesystem::path& dir) {
  if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  GeneratedDataset out;
  out.manifest.base_dir = dir;
  std::ofstream scenes_csv(dir / "scenes.csv", std::ios::binary);
  if (!scenes_csv) throw DataError("cannot open for writing: " + (dir / "scenes.csv").string());
  scenes_csv << "path,curvature,offset\n";
  char name[32];
  char line[128];
  for (std::size_t i = 0; i < n; ++i) {
    const SceneParams p = sample_scene_params(spec, i);
    const Scene scene = gen_scene(spec, p.curvature, p.offset, i);
    std::snprintf(name, sizeof name, "scene_%05zu.pgm", i);
    write_pgm(dir / name, scene.image);
    out.manifest.records.push_back({name, scene.angle});
    out.params.push_back(p);
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g\n", name, p.curvature, p.offset);
    scenes_csv << line;
  }
  if (!scenes_csv) throw DataError("write failed: " + (dir / "scenes.csv").string());
  write_manifest(dir / "manifest.csv", out.manifest);

  std::ofstream world(dir / "world.txt", std::ios::binary);
  if (!world) throw DataError("cannot open for writing: " + (dir / "world.txt").string());
  const auto put = [&](const char* key, double v) {
    std::snprintf(line, sizeof line, "%s = %.17g\n", key, v);
    world << line;
  };
  world << "id = " << spec.id << '\n';
  world << "seed = " << spec.seed << '\n';
  put("background_low", spec.background_low);
  put("background_high", spec.background_high);
  put("stripe_period", spec.stripe_period);
  put("road_intensity", spec.road_intensity);
  put("lane_width", spec.lane_width);
  put("edge_intensity", spec.edge_intensity);
  put("edge_width", spec.edge_width);
  put("texture_amplitude", spec.texture_amplitude);
  world << "distractor_count = " << spec.distractor_count << '\n';
  put("distractor_amplitude", spec.distractor_amplitude);
  put("k_steer", kSteerPerCurvature);
  put("k_off", kSteerPerOffset);
  world << "count = " << n << '\n';
  if (!world) throw DataError("write failed: " + (dir / "world.txt").string());
  return out;
}

std::vector<SceneParams> read_scene_params(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != "path,curvature,offset") throw DataError("bad scenes.csv header: " + csv.string());
  std::vector<SceneParams> params;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string::npos ? std::string::npos : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw DataError("bad scenes.csv row: " + line);
    try {
      params.push_back({std::stod(line.substr(c1 + 1, c2 - c1 - 1)), std::stod(line.substr(c2 + 1))});
    } catch (const std::logic_error&) {
      throw DataError("bad number in scenes.csv row: " + line);
    }
  }
  return params;
}

WorldSpec read_world_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  const auto num = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("world.txt missing ") + key);
    return std::stod(it->second);
  };
  WorldSpec s;
  if (kv.count("id") == 0 || kv["id"].empty()) throw DataError("world.txt missing id");
  s.id = kv["id"][0];
  s.seed = static_cast<std::uint64_t>(std::stoull(kv["seed"]));
  s.background_low = num("background_low");
  s.background_high = num("background_high");
  s.stripe_period = num("stripe_period");
  s.road_intensity = num("road_intensity");
  s.lane_width = num("lane_width");
  s.edge_intensity = num("edge_intensity");
  s.edge_width = num("edge_width");
  s.texture_amplitude = num("texture_amplitude");
  if (kv.count("distractor_count")) {
    s.distractor_count = static_cast<std::size_t>(std::stoull(kv["distractor_count"]));
    s.distractor_amplitude = num("distractor_amplitude");
  }
  s.validate();
  return s;
}

}  // namespace novsal
