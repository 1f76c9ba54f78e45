#ifndef ETO_MEDIA_HPP_
#define ETO_MEDIA_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace eto {

// Scalable tiled 360-degree video content. Layer index 0 is the base layer;
// indices 1..L are enhancement layers.
struct Tile {
  int row = 0;
  int col = 0;
  std::vector<double> layer_sizes_bits;  // b(l), l = 0..L
  std::vector<double> layer_mse;         // y(e): cumulative MSE using layers 0..e
};

struct Segment {
  std::vector<Tile> tiles;  // row-major, rows * cols entries
};

struct VideoManifest {
  std::string video_id;
  int rows = 0;    // H
  int cols = 0;    // V
  int layers = 0;  // L
  std::vector<Segment> segments;

  const Tile& tile(int segment, int row, int col) const {
    return segments[segment].tiles[static_cast<size_t>(row) * cols + col];
  }
};

struct HeadPose {
  double yaw_deg = 0.0;    // [-180, 180)
  double pitch_deg = 0.0;  // [-90, 90]
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
};

// Binary H x V viewport membership, row-major.
struct ViewportMask {
  int rows = 0;
  int cols = 0;
  std::vector<uint8_t> cells;

  bool at(int row, int col) const {
    return cells[static_cast<size_t>(row) * cols + col] != 0;
  }
  int count() const;
};

// One GoP decoding task with all elasticity options materialized.
struct ElasticTask {
  std::vector<double> sizes;         // S(e), bits
  std::vector<double> intensities;   // I(e) = beta * S(e), cycles/bit
  std::vector<double> result_sizes;  // S_res(e), bits
  std::vector<double> psnr;          // q(e), dB
  double deadline_s = 1.0;

  int levels() const { return static_cast<int>(sizes.size()); }
};

class InvalidManifest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidViewport : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tile centers are laid out on an equirectangular grid. Tile (h, v) is in
// view iff its center lies in the axis-aligned angular box around the pose.
ViewportMask viewport_mask(const HeadPose& pose, int rows, int cols);

double viewport_psnr(const VideoManifest& manifest, int segment_index,
                     const ViewportMask& mask, int level);

ElasticTask make_task(const VideoManifest& manifest, int segment_index,
                      const ViewportMask& mask, double beta,
                      double result_ratio, double deadline_s);

struct SizeProfile {
  double base_tile_bits = 5.0e4;      // mean b(0)
  double enhancement_bits = 2.0e5;    // mean b(1)
  double layer_growth = 1.25;         // b(l) = b(1) * growth^(l-1)
  double jitter = 0.2;                // relative uniform jitter per tile
  double segment_variation = 0.3;     // per-segment complexity spread
};

struct QualityProfile {
  double base_mse = 64.0;   // y(0)
  double decay = 0.5;       // y(e) = y(e-1) * decay
  double jitter = 0.0;      // relative jitter on y(0)
  double mse_floor = 1.0;
};

VideoManifest generate_manifest(uint64_t seed, int rows, int cols, int layers,
                                int segment_count, const SizeProfile& sizes,
                                const QualityProfile& quality,
                                std::string video_id = "synthetic");

// Throws InvalidManifest describing the first broken invariant.
void validate(const VideoManifest& manifest);

VideoManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const VideoManifest& manifest,
                   const std::filesystem::path& path);
std::string manifest_to_json(const VideoManifest& manifest);
VideoManifest manifest_from_json(const std::string& text);

struct HeadSample {
  int segment_index = 0;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
};

using HeadTrace = std::vector<HeadSample>;

HeadTrace load_head_trace(const std::filesystem::path& path);
void save_head_trace(const HeadTrace& trace, const std::filesystem::path& path);

// Random-walk head motion, one sample per segment.
HeadTrace generate_head_trace(uint64_t seed, int segment_count,
                              double yaw_step_deg = 20.0,
                              double pitch_step_deg = 8.0);

}  // namespace eto

#endif  // ETO_MEDIA_HPP_
