#ifndef ETO_SCENARIO_IO_HPP_
#define ETO_SCENARIO_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "eto/environment.hpp"

namespace eto {

nlohmann::json config_to_json(const ScenarioConfig& config);
// Missing keys keep the values already in `base`.
ScenarioConfig config_from_json(const nlohmann::json& j, ScenarioConfig base = {});

struct UserBinding {
  std::string manifest;
  std::string head_trace;
};

struct ChannelBinding {
  std::string uplink;
  std::string downlink;
  Technology technology = Technology::k5G;
};

struct ScenarioFile {
  ScenarioConfig config;
  std::vector<UserBinding> users;
  std::vector<ChannelBinding> channels;
  std::filesystem::path base_dir;  // relative asset paths resolve here
};

ScenarioFile parse_scenario_file(const std::filesystem::path& path);
nlohmann::json scenario_file_json(const ScenarioFile& file);
// Loads every bound asset and builds the scenario. Throws ConfigError.
std::shared_ptr<const Scenario> load_scenario(const ScenarioFile& file);
std::shared_ptr<const Scenario> load_scenario(const std::filesystem::path& path);

struct ScenarioAssets {
  std::vector<VideoManifest> manifests;
  std::vector<HeadTrace> head_traces;
  std::vector<ChannelTrace> uplinks;
  std::vector<ChannelTrace> downlinks;
};

// Self-contained synthetic scenario: one generated manifest and head trace
// per user, one generated (or constant-rate) trace pair per channel.
struct SyntheticSpec {
  uint64_t seed = 1;
  int layers = 7;
  int rows = 4;
  int cols = 8;
  int segments = 36;
  std::vector<Technology> technologies;  // per channel; default cycles 5G, 4G, WiGig
  std::vector<double> constant_uplink_bps;    // per channel; empty means generated
  std::vector<double> constant_downlink_bps;  // per channel; empty means uplink rate x 2
  double horizon_s = 120.0;
  double step_s = 0.1;
  SizeProfile sizes;
  QualityProfile quality;
  ScenarioConfig config;  // users and channels taken from here
};

ScenarioAssets synthesize_assets(const SyntheticSpec& spec);
std::shared_ptr<const Scenario> synthetic_scenario(const SyntheticSpec& spec);

// Writes the assets plus scenario.json under `dir`; returns the scenario path.
std::filesystem::path write_synthetic_bundle(const SyntheticSpec& spec,
                                             const std::filesystem::path& dir);

}  // namespace eto

#endif  // ETO_SCENARIO_IO_HPP_
