#ifndef ETO_TESTS_SUPPORT_HPP_
#define ETO_TESTS_SUPPORT_HPP_

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eto/environment.hpp"
#include "eto/media.hpp"
#include "eto/network.hpp"
#include "eto/scenario_io.hpp"

namespace eto::test {

// Every tile gets the same layer sizes and cumulative MSE.
inline VideoManifest uniform_manifest(int rows, int cols, std::vector<double> sizes,
                                      std::vector<double> mse, int segments = 1) {
  VideoManifest m;
  m.video_id = "uniform";
  m.rows = rows;
  m.cols = cols;
  m.layers = static_cast<int>(sizes.size()) - 1;
  for (int s = 0; s < segments; ++s) {
    Segment seg;
    for (int h = 0; h < rows; ++h)
      for (int v = 0; v < cols; ++v) seg.tiles.push_back({h, v, sizes, mse});
    m.segments.push_back(seg);
  }
  return m;
}

inline ChannelTrace piecewise(std::vector<RateSample> samples) {
  ChannelTrace t;
  t.technology = Technology::k5G;
  t.samples = std::move(samples);
  return t;
}

// Single-tile video on constant-rate channels with an explicit beta, so every
// cost has a closed form.
struct TinySpec {
  int users = 1;
  std::vector<double> layer_bits{1e6, 5e5};
  std::vector<double> layer_mse{16.0, 4.0};
  std::vector<double> uplink_bps{100e6};
  std::vector<double> downlink_bps{200e6};
  double beta = 1e-5;
  int episode_length = 4;
};

inline std::shared_ptr<const Scenario> tiny_scenario(const TinySpec& t, ScenarioConfig cfg = {}) {
  cfg.users = t.users;
  cfg.channels = static_cast<int>(t.uplink_bps.size());
  cfg.beta = t.beta;
  cfg.episode_length = t.episode_length;
  cfg.fov_h_deg = 360.0;
  cfg.fov_v_deg = 180.0;
  std::vector<VideoManifest> manifests;
  std::vector<HeadTrace> heads;
  for (int k = 0; k < t.users; ++k) {
    manifests.push_back(uniform_manifest(1, 1, t.layer_bits, t.layer_mse, 4));
    heads.push_back({{0, 0.0, 0.0}});
  }
  std::vector<ChannelTrace> up, down;
  for (size_t c = 0; c < t.uplink_bps.size(); ++c) {
    up.push_back(constant_trace(t.uplink_bps[c]));
    down.push_back(constant_trace(t.downlink_bps[c]));
  }
  return build_scenario(cfg, manifests, heads, up, down);
}

inline SyntheticSpec small_synthetic(int users, int layers, int channels, uint64_t seed = 7) {
  SyntheticSpec s;
  s.seed = seed;
  s.layers = layers;
  s.rows = 2;
  s.cols = 4;
  s.segments = 8;
  s.horizon_s = 30.0;
  s.config.users = users;
  s.config.channels = channels;
  s.config.episode_length = 6;
  return s;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("eto_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace eto::test

#endif  // ETO_TESTS_SUPPORT_HPP_
