#include "eto/scenario_io.hpp"

#include <fmt/format.h>

#include "eto/util.hpp"

namespace eto {

namespace fs = std::filesystem;
using nlohmann::json;

json config_to_json(const ScenarioConfig& c) {
  json j = {
      {"users", c.users},
      {"channels", c.channels},
      {"weights", {{"w0", c.reward.w0}, {"w1", c.reward.w1}, {"w2", c.reward.w2}}},
      {"lambda_penalty", c.reward.lambda_penalty},
      {"psnr_floor_db", c.reward.psnr_floor_db},
      {"floor_violations", c.reward.floor_violations},
      {"deadline_s", c.deadline_s},
      {"user_deadlines_s", c.user_deadlines_s},
      {"episode_length", c.episode_length},
      {"min_level", c.min_level},
      {"compute",
       {{"kappa", c.compute.kappa},
        {"f_vr_hz", c.compute.f_vr_hz},
        {"z_mec_bps", c.compute.z_mec_bps},
        {"z_user_bps", c.compute.z_user_bps}}},
      {"power",
       {{"tx_mw_per_mbps", c.power.tx_mw_per_mbps}, {"rx_mw_per_mbps", c.power.rx_mw_per_mbps}}},
      {"ewma_alpha", c.ewma_alpha},
      {"rt_cap_multiplier", c.rt_cap_multiplier},
      {"beta", c.beta},
      {"result_ratio", c.result_ratio},
      {"fov_h_deg", c.fov_h_deg},
      {"fov_v_deg", c.fov_v_deg},
      {"scales",
       {{"size_bits", c.scales.size_bits},
        {"intensity", c.scales.intensity},
        {"rate_bps", c.scales.rate_bps}}}};
  return j;
}

ScenarioConfig config_from_json(const json& j, ScenarioConfig c) {
  try {
    c.users = j.value("users", c.users);
    c.channels = j.value("channels", c.channels);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.reward.w0 = w.value("w0", c.reward.w0);
      c.reward.w1 = w.value("w1", c.reward.w1);
      c.reward.w2 = w.value("w2", c.reward.w2);
    }
    c.reward.lambda_penalty = j.value("lambda_penalty", c.reward.lambda_penalty);
    c.reward.psnr_floor_db = j.value("psnr_floor_db", c.reward.psnr_floor_db);
    c.reward.floor_violations = j.value("floor_violations", c.reward.floor_violations);
    c.deadline_s = j.value("deadline_s", c.deadline_s);
    c.user_deadlines_s = j.value("user_deadlines_s", c.user_deadlines_s);
    c.episode_length = j.value("episode_length", c.episode_length);
    c.min_level = j.value("min_level", c.min_level);
    if (j.contains("compute")) {
      const auto& p = j.at("compute");
      c.compute.kappa = p.value("kappa", c.compute.kappa);
      c.compute.f_vr_hz = p.value("f_vr_hz", c.compute.f_vr_hz);
      c.compute.z_mec_bps = p.value("z_mec_bps", c.compute.z_mec_bps);
      c.compute.z_user_bps = p.value("z_user_bps", c.compute.z_user_bps);
    }
    if (j.contains("power")) {
      const auto& p = j.at("power");
      c.power.tx_mw_per_mbps = p.value("tx_mw_per_mbps", c.power.tx_mw_per_mbps);
      c.power.rx_mw_per_mbps = p.value("rx_mw_per_mbps", c.power.rx_mw_per_mbps);
    }
    c.ewma_alpha = j.value("ewma_alpha", c.ewma_alpha);
    c.rt_cap_multiplier = j.value("rt_cap_multiplier", c.rt_cap_multiplier);
    c.beta = j.value("beta", c.beta);
    c.result_ratio = j.value("result_ratio", c.result_ratio);
    c.fov_h_deg = j.value("fov_h_deg", c.fov_h_deg);
    c.fov_v_deg = j.value("fov_v_deg", c.fov_v_deg);
    if (j.contains("scales")) {
      const auto& s = j.at("scales");
      c.scales.size_bits = s.value("size_bits", c.scales.size_bits);
      c.scales.intensity = s.value("intensity", c.scales.intensity);
      c.scales.rate_bps = s.value("rate_bps", c.scales.rate_bps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  return c;
}

ScenarioFile parse_scenario_file(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  ScenarioFile f;
  f.base_dir = path.parent_path();
  f.config = config_from_json(j);
  try {
    for (const auto& u : j.at("bindings").at("users"))
      f.users.push_back({u.at("manifest").get<std::string>(), u.at("head_trace").get<std::string>()});
    for (const auto& c : j.at("bindings").at("channels"))
      f.channels.push_back({c.at("uplink").get<std::string>(), c.at("downlink").get<std::string>(),
                            technology_from_string(c.value("technology", std::string("5g")))});
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: bindings: {}", path.string(), e.what()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: bindings: {}", path.string(), e.what()));
  }
  return f;
}

json scenario_file_json(const ScenarioFile& f) {
  json j = config_to_json(f.config);
  json users = json::array();
  for (const auto& u : f.users) users.push_back({{"manifest", u.manifest}, {"head_trace", u.head_trace}});
  json channels = json::array();
  for (const auto& c : f.channels)
    channels.push_back(
        {{"uplink", c.uplink}, {"downlink", c.downlink}, {"technology", to_string(c.technology)}});
  j["bindings"] = {{"users", users}, {"channels", channels}};
  return j;
}

std::shared_ptr<const Scenario> load_scenario(const ScenarioFile& f) {
  const auto& c = f.config;
  if (static_cast<int>(f.users.size()) != c.users)
    throw ConfigError(fmt::format("{} users configured but {} user bindings", c.users, f.users.size()));
  if (static_cast<int>(f.channels.size()) != c.channels)
    throw ConfigError(
        fmt::format("{} channels configured but {} channel bindings", c.channels, f.channels.size()));
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : f.base_dir / p; };
  ScenarioAssets a;
  try {
    for (const auto& u : f.users) {
      a.manifests.push_back(load_manifest(resolve(u.manifest)));
      a.head_traces.push_back(load_head_trace(resolve(u.head_trace)));
    }
    for (size_t i = 0; i < f.channels.size(); ++i) {
      const auto& ch = f.channels[i];
      const int id = static_cast<int>(i) + 1;
      a.uplinks.push_back(load_trace(resolve(ch.uplink), id, Direction::kUplink, ch.technology));
      a.downlinks.push_back(load_trace(resolve(ch.downlink), id, Direction::kDownlink, ch.technology));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return build_scenario(c, std::move(a.manifests), std::move(a.head_traces), std::move(a.uplinks),
                        std::move(a.downlinks));
}

std::shared_ptr<const Scenario> load_scenario(const fs::path& path) {
  return load_scenario(parse_scenario_file(path));
}

namespace {

Technology channel_technology(const SyntheticSpec& s, int ch) {
  if (!s.technologies.empty()) return s.technologies[static_cast<size_t>(ch) % s.technologies.size()];
  static const Technology cycle[] = {Technology::k5G, Technology::k4G, Technology::kWiGig};
  return cycle[ch % 3];
}

}  // namespace

ScenarioAssets synthesize_assets(const SyntheticSpec& s) {
  const int users = s.config.users;
  const int channels = s.config.channels;
  ScenarioAssets a;
  for (int k = 0; k < users; ++k) {
    a.manifests.push_back(generate_manifest(derive_seed(s.seed, 100 + k), s.rows, s.cols, s.layers,
                                            s.segments, s.sizes, s.quality,
                                            fmt::format("video{}", k)));
    a.head_traces.push_back(generate_head_trace(derive_seed(s.seed, 200 + k), s.segments));
  }
  for (int c = 0; c < channels; ++c) {
    const Technology tech = channel_technology(s, c);
    if (!s.constant_uplink_bps.empty()) {
      const double up = s.constant_uplink_bps[static_cast<size_t>(c) % s.constant_uplink_bps.size()];
      const double down = s.constant_downlink_bps.empty()
                              ? 2.0 * up
                              : s.constant_downlink_bps[static_cast<size_t>(c) %
                                                        s.constant_downlink_bps.size()];
      a.uplinks.push_back(constant_trace(up, tech));
      a.downlinks.push_back(constant_trace(down, tech));
    } else {
      a.uplinks.push_back(generate_trace(derive_seed(s.seed, 300 + c), tech, s.horizon_s, s.step_s));
      a.downlinks.push_back(
          generate_trace(derive_seed(s.seed, 400 + c), tech, s.horizon_s, s.step_s));
    }
    a.uplinks.back().channel_id = c + 1;
    a.downlinks.back().channel_id = c + 1;
    a.downlinks.back().direction = Direction::kDownlink;
  }
  return a;
}

std::shared_ptr<const Scenario> synthetic_scenario(const SyntheticSpec& s) {
  ScenarioAssets a = synthesize_assets(s);
  return build_scenario(s.config, std::move(a.manifests), std::move(a.head_traces),
                        std::move(a.uplinks), std::move(a.downlinks));
}

fs::path write_synthetic_bundle(const SyntheticSpec& s, const fs::path& dir) {
  const ScenarioAssets a = synthesize_assets(s);
  ScenarioFile f;
  f.config = s.config;
  for (size_t k = 0; k < a.manifests.size(); ++k) {
    const std::string m = fmt::format("manifest_{}.json", k);
    const std::string h = fmt::format("head_{}.csv", k);
    save_manifest(a.manifests[k], dir / m);
    save_head_trace(a.head_traces[k], dir / h);
    f.users.push_back({m, h});
  }
  for (size_t c = 0; c < a.uplinks.size(); ++c) {
    const std::string up = fmt::format("uplink_{}.csv", c + 1);
    const std::string down = fmt::format("downlink_{}.csv", c + 1);
    save_trace(a.uplinks[c], dir / up);
    save_trace(a.downlinks[c], dir / down);
    f.channels.push_back({up, down, a.uplinks[c].technology});
  }
  const fs::path out = dir / "scenario.json";
  write_file_atomic(out, scenario_file_json(f).dump(2) + "\n");
  return out;
}

}  // namespace eto
