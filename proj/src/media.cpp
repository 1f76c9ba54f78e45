#include "eto/media.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "eto/util.hpp"

namespace eto {

namespace {

constexpr double kPeak = 255.0 * 255.0;

double wrap_degrees(double deg) {
  double d = std::fmod(deg + 180.0, 360.0);
  if (d < 0.0) d += 360.0;
  return d - 180.0;
}

double yaw_center(int col, int cols) { return -180.0 + (col + 0.5) * 360.0 / cols; }

// Row 0 is the top of the panorama.
double pitch_center(int row, int rows) { return 90.0 - (row + 0.5) * 180.0 / rows; }

}  // namespace

int ViewportMask::count() const {
  return static_cast<int>(std::count(cells.begin(), cells.end(), uint8_t{1}));
}

ViewportMask viewport_mask(const HeadPose& pose, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("grid must be at least 1x1");
  ViewportMask mask{rows, cols, std::vector<uint8_t>(static_cast<size_t>(rows) * cols, 0)};
  const double half_h = pose.fov_h_deg / 2.0;
  const double half_v = pose.fov_v_deg / 2.0;
  for (int h = 0; h < rows; ++h) {
    const double dp = std::abs(pitch_center(h, rows) - pose.pitch_deg);
    if (dp > half_v) continue;
    for (int v = 0; v < cols; ++v) {
      const double dy = std::abs(wrap_degrees(yaw_center(v, cols) - pose.yaw_deg));
      if (dy <= half_h) mask.cells[static_cast<size_t>(h) * cols + v] = 1;
    }
  }
  if (mask.count() == 0) {
    // FOV narrower than a tile: keep the tile containing the view direction.
    int v = static_cast<int>(std::floor((wrap_degrees(pose.yaw_deg) + 180.0) / 360.0 * cols));
    int h = static_cast<int>(std::floor((90.0 - pose.pitch_deg) / 180.0 * rows));
    v = std::clamp(v, 0, cols - 1);
    h = std::clamp(h, 0, rows - 1);
    mask.cells[static_cast<size_t>(h) * cols + v] = 1;
  }
  return mask;
}

double viewport_psnr(const VideoManifest& manifest, int segment_index,
                     const ViewportMask& mask, int level) {
  if (segment_index < 0 || segment_index >= static_cast<int>(manifest.segments.size()))
    throw std::out_of_range("segment index out of range");
  if (level < 0 || level > manifest.layers) throw std::out_of_range("level out of range");
  const int in_view = mask.count();
  if (in_view == 0) throw InvalidViewport("viewport mask has no tiles set");
  double sum = 0.0;
  for (int h = 0; h < manifest.rows; ++h)
    for (int v = 0; v < manifest.cols; ++v)
      if (mask.at(h, v))
        sum += 10.0 * std::log10(kPeak / manifest.tile(segment_index, h, v).layer_mse[level]);
  return sum / in_view;
}

ElasticTask make_task(const VideoManifest& manifest, int segment_index,
                      const ViewportMask& mask, double beta,
                      double result_ratio, double deadline_s) {
  if (segment_index < 0 || segment_index >= static_cast<int>(manifest.segments.size()))
    throw std::out_of_range("segment index out of range");
  if (mask.rows != manifest.rows || mask.cols != manifest.cols)
    throw std::invalid_argument("mask shape does not match manifest grid");
  const int levels = manifest.layers + 1;
  ElasticTask task;
  task.deadline_s = deadline_s;
  task.sizes.assign(levels, 0.0);

  const auto& tiles = manifest.segments[segment_index].tiles;
  double base = 0.0;
  for (const auto& t : tiles) base += t.layer_sizes_bits[0];
  task.sizes[0] = base;
  for (int l = 1; l < levels; ++l) {
    double layer = 0.0;
    for (size_t i = 0; i < tiles.size(); ++i)
      if (mask.cells[i]) layer += tiles[i].layer_sizes_bits[l];
    task.sizes[l] = task.sizes[l - 1] + layer;
  }

  task.intensities.resize(levels);
  task.result_sizes.resize(levels);
  task.psnr.resize(levels);
  for (int e = 0; e < levels; ++e) {
    task.intensities[e] = beta * task.sizes[e];
    task.result_sizes[e] = result_ratio * task.sizes[e];
    task.psnr[e] = viewport_psnr(manifest, segment_index, mask, e);
  }
  return task;
}

VideoManifest generate_manifest(uint64_t seed, int rows, int cols, int layers,
                                int segment_count, const SizeProfile& sizes,
                                const QualityProfile& quality,
                                std::string video_id) {
  if (rows < 1 || cols < 1 || layers < 1 || segment_count < 1)
    throw std::invalid_argument("manifest counts must be >= 1");
  uint64_t rng = derive_seed(seed, 0x6d616e);
  VideoManifest m;
  m.video_id = std::move(video_id);
  m.rows = rows;
  m.cols = cols;
  m.layers = layers;
  m.segments.resize(segment_count);
  for (auto& seg : m.segments) {
    const double complexity =
        1.0 + sizes.segment_variation * (2.0 * uniform01(rng) - 1.0);
    seg.tiles.reserve(static_cast<size_t>(rows) * cols);
    for (int h = 0; h < rows; ++h) {
      for (int v = 0; v < cols; ++v) {
        Tile t;
        t.row = h;
        t.col = v;
        t.layer_sizes_bits.resize(layers + 1);
        for (int l = 0; l <= layers; ++l) {
          const double mean = l == 0 ? sizes.base_tile_bits
                                     : sizes.enhancement_bits * std::pow(sizes.layer_growth, l - 1);
          const double jit = 1.0 + sizes.jitter * (2.0 * uniform01(rng) - 1.0);
          t.layer_sizes_bits[l] = std::max(1.0, std::round(mean * complexity * jit));
        }
        t.layer_mse.resize(layers + 1);
        double y = quality.base_mse * (1.0 + quality.jitter * (2.0 * uniform01(rng) - 1.0));
        for (int e = 0; e <= layers; ++e) {
          t.layer_mse[e] = std::max(quality.mse_floor, y);
          y *= quality.decay;
        }
        seg.tiles.push_back(std::move(t));
      }
    }
  }
  return m;
}

void validate(const VideoManifest& m) {
  if (m.rows < 1 || m.cols < 1 || m.layers < 1)
    throw InvalidManifest("grid dimensions and layer count must be >= 1");
  if (m.segments.empty()) throw InvalidManifest("manifest has no segments");
  const size_t expected = static_cast<size_t>(m.rows) * m.cols;
  for (size_t s = 0; s < m.segments.size(); ++s) {
    const auto& seg = m.segments[s];
    if (seg.tiles.size() != expected)
      throw InvalidManifest(fmt::format("segment {} has {} tiles, expected {}", s,
                                        seg.tiles.size(), expected));
    for (size_t i = 0; i < seg.tiles.size(); ++i) {
      const auto& t = seg.tiles[i];
      if (t.row != static_cast<int>(i) / m.cols || t.col != static_cast<int>(i) % m.cols)
        throw InvalidManifest(fmt::format("segment {} tile {} is out of row-major order", s, i));
      if (t.layer_sizes_bits.size() != static_cast<size_t>(m.layers + 1) ||
          t.layer_mse.size() != static_cast<size_t>(m.layers + 1))
        throw InvalidManifest(fmt::format("segment {} tile ({},{}) needs {} layer entries", s,
                                          t.row, t.col, m.layers + 1));
      for (int l = 0; l <= m.layers; ++l) {
        if (!(t.layer_sizes_bits[l] > 0.0))
          throw InvalidManifest(fmt::format("segment {} tile ({},{}) layer {} size must be > 0",
                                            s, t.row, t.col, l));
        if (!(t.layer_mse[l] > 0.0))
          throw InvalidManifest(fmt::format("segment {} tile ({},{}) layer {} mse must be > 0",
                                            s, t.row, t.col, l));
        if (l > 0 && t.layer_mse[l] > t.layer_mse[l - 1])
          throw InvalidManifest(fmt::format(
              "segment {} tile ({},{}) mse increases at layer {}", s, t.row, t.col, l));
      }
    }
  }
}

std::string manifest_to_json(const VideoManifest& m) {
  nlohmann::json j;
  j["video_id"] = m.video_id;
  j["H"] = m.rows;
  j["V"] = m.cols;
  j["L"] = m.layers;
  auto& segs = j["segments"] = nlohmann::json::array();
  for (const auto& seg : m.segments) {
    nlohmann::json tiles = nlohmann::json::array();
    for (const auto& t : seg.tiles)
      tiles.push_back({{"row", t.row},
                       {"col", t.col},
                       {"layer_sizes_bits", t.layer_sizes_bits},
                       {"layer_mse", t.layer_mse}});
    segs.push_back({{"tiles", std::move(tiles)}});
  }
  return j.dump(1) + "\n";
}

VideoManifest manifest_from_json(const std::string& text) {
  VideoManifest m;
  try {
    auto j = nlohmann::json::parse(text);
    m.video_id = j.at("video_id").get<std::string>();
    m.rows = j.at("H").get<int>();
    m.cols = j.at("V").get<int>();
    m.layers = j.at("L").get<int>();
    for (const auto& js : j.at("segments")) {
      Segment seg;
      for (const auto& jt : js.at("tiles")) {
        Tile t;
        t.row = jt.at("row").get<int>();
        t.col = jt.at("col").get<int>();
        t.layer_sizes_bits = jt.at("layer_sizes_bits").get<std::vector<double>>();
        t.layer_mse = jt.at("layer_mse").get<std::vector<double>>();
        seg.tiles.push_back(std::move(t));
      }
      std::sort(seg.tiles.begin(), seg.tiles.end(), [](const Tile& a, const Tile& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      m.segments.push_back(std::move(seg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidManifest(std::string("manifest schema error: ") + e.what());
  }
  validate(m);
  return m;
}

VideoManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_file(path));
}

void save_manifest(const VideoManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, manifest_to_json(manifest));
}

HeadTrace load_head_trace(const std::filesystem::path& path) {
  auto table = parse_csv(read_file(path));
  const int cs = table.column("segment_index");
  const int cy = table.column("yaw_deg");
  const int cp = table.column("pitch_deg");
  if (cs < 0 || cy < 0 || cp < 0)
    throw std::runtime_error(path.string() +
                             ": head trace needs columns segment_index,yaw_deg,pitch_deg");
  HeadTrace trace;
  for (const auto& row : table.rows)
    trace.push_back({std::stoi(row[cs]), std::stod(row[cy]), std::stod(row[cp])});
  if (trace.empty()) throw std::runtime_error(path.string() + ": head trace has no samples");
  return trace;
}

void save_head_trace(const HeadTrace& trace, const std::filesystem::path& path) {
  std::string out = "segment_index,yaw_deg,pitch_deg\n";
  for (const auto& s : trace)
    out += fmt::format("{},{},{}\n", s.segment_index, format_double(s.yaw_deg),
                       format_double(s.pitch_deg));
  write_file_atomic(path, out);
}

HeadTrace generate_head_trace(uint64_t seed, int segment_count, double yaw_step_deg,
                              double pitch_step_deg) {
  uint64_t rng = derive_seed(seed, 0x68656164);
  HeadTrace trace;
  double yaw = uniform(rng, -180.0, 180.0);
  double pitch = uniform(rng, -20.0, 20.0);
  for (int s = 0; s < segment_count; ++s) {
    trace.push_back({s, wrap_degrees(yaw), pitch});
    yaw += yaw_step_deg * normal(rng);
    pitch = std::clamp(pitch + pitch_step_deg * normal(rng), -60.0, 60.0);
  }
  return trace;
}

}  // namespace eto
