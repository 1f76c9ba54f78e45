#include "eto/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include "eto/agents.hpp"
#include "eto/oracle.hpp"
#include "eto/scenario_io.hpp"
#include "eto/util.hpp"

namespace eto::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_dir(const json& args) {
  const fs::path dir = args.at("out").get<std::string>();
  if (!fs::is_directory(dir))
    throw UsageError(fmt::format("output directory '{}' does not exist", dir.string()));
  return dir;
}

void write_text(const fs::path& dir, const std::string& name, const std::string& text,
                json& artifacts) {
  write_file_atomic(dir / name, text);
  artifacts.push_back(name);
}

std::shared_ptr<const Scenario> scenario_from_args(const json& args) {
  ScenarioFile f;
  const json& j = args.at("scenario");
  f.config = config_from_json(j);
  for (const auto& u : j.at("bindings").at("users"))
    f.users.push_back({u.at("manifest").get<std::string>(), u.at("head_trace").get<std::string>()});
  for (const auto& c : j.at("bindings").at("channels"))
    f.channels.push_back({c.at("uplink").get<std::string>(), c.at("downlink").get<std::string>(),
                          technology_from_string(c.at("technology").get<std::string>())});
  return load_scenario(f);
}

json cmd_gen_traces(const json& a, const fs::path& dir, std::ostream& log) {
  json artifacts = json::array();
  const Technology tech = technology_from_string(a.at("tech").get<std::string>());
  const uint64_t seed = a.at("seed").get<uint64_t>();
  const double horizon = a.at("horizon").get<double>();
  const double step = a.at("step").get<double>();
  if (!(horizon > 0.0 && step > 0.0)) throw UsageError("horizon and step must be positive");
  const std::string tag = to_string(tech);
  int i = 0;
  for (const char* dir_name : {"uplink", "downlink"}) {
    ChannelTrace t = generate_trace(derive_seed(seed, ++i), tech, horizon, step);
    const std::string name = fmt::format("trace_{}_{}.csv", tag, dir_name);
    write_text(dir, name, trace_to_csv(t), artifacts);
    log << fmt::format("{}: {} samples, mean {:.1f} Mbps\n", name, t.samples.size(),
                       t.mean_rate() / 1e6);
  }
  return artifacts;
}

json cmd_gen_manifest(const json& a, const fs::path& dir, std::ostream& log) {
  json artifacts = json::array();
  SizeProfile sizes;
  sizes.base_tile_bits = a.at("base_tile_bits").get<double>();
  sizes.enhancement_bits = a.at("enhancement_bits").get<double>();
  const VideoManifest m = generate_manifest(
      a.at("seed").get<uint64_t>(), a.at("rows").get<int>(), a.at("cols").get<int>(),
      a.at("layers").get<int>(), a.at("segments").get<int>(), sizes, QualityProfile{},
      a.at("id").get<std::string>());
  validate(m);
  const std::string name = a.at("id").get<std::string>() + ".json";
  write_text(dir, name, manifest_to_json(m), artifacts);
  log << fmt::format("{}: {}x{} tiles, L={}, {} segments\n", name, m.rows, m.cols, m.layers,
                     m.segments.size());
  return artifacts;
}

json cmd_gen_headtrace(const json& a, const fs::path& dir, std::ostream& log) {
  json artifacts = json::array();
  const HeadTrace t = generate_head_trace(a.at("seed").get<uint64_t>(), a.at("segments").get<int>(),
                                          a.at("yaw_step").get<double>(),
                                          a.at("pitch_step").get<double>());
  save_head_trace(t, dir / "head_trace.csv");
  artifacts.push_back("head_trace.csv");
  log << fmt::format("head_trace.csv: {} samples\n", t.size());
  return artifacts;
}

json cmd_gen_scenario(const json& a, const fs::path& dir, std::ostream& log) {
  SyntheticSpec s;
  s.seed = a.at("seed").get<uint64_t>();
  s.layers = a.at("layers").get<int>();
  s.rows = a.at("rows").get<int>();
  s.cols = a.at("cols").get<int>();
  s.segments = a.at("segments").get<int>();
  s.sizes.base_tile_bits = a.at("base_tile_bits").get<double>();
  s.sizes.enhancement_bits = a.at("enhancement_bits").get<double>();
  for (double r : a.at("constant_uplink_mbps").get<std::vector<double>>())
    s.constant_uplink_bps.push_back(r * 1e6);
  for (const auto& t : a.at("technologies").get<std::vector<std::string>>())
    s.technologies.push_back(technology_from_string(t));
  s.config.users = a.at("users").get<int>();
  s.config.channels = a.at("channels").get<int>();
  s.config.deadline_s = a.at("deadline").get<double>();
  s.config.episode_length = a.at("episode_length").get<int>();
  s.config.min_level = a.value("min_level", 0);
  const fs::path path = write_synthetic_bundle(s, dir);
  json artifacts = json::array();
  for (int k = 0; k < s.config.users; ++k) {
    artifacts.push_back(fmt::format("manifest_{}.json", k));
    artifacts.push_back(fmt::format("head_{}.csv", k));
  }
  for (int c = 1; c <= s.config.channels; ++c) {
    artifacts.push_back(fmt::format("uplink_{}.csv", c));
    artifacts.push_back(fmt::format("downlink_{}.csv", c));
  }
  artifacts.push_back("scenario.json");
  const auto scen = load_scenario(path);
  log << fmt::format("{}: K={}, C={}, L={}, beta={:.4g}\n", path.string(), scen->config.users,
                     scen->config.channels, scen->layers, scen->beta);
  return artifacts;
}

json cmd_pareto(const json& a, const fs::path& dir, std::ostream& log) {
  const auto scen = scenario_from_args(a);
  SweepOptions o;
  o.n_weights = a.at("n_weights").get<int>();
  o.seed = a.at("seed").get<uint64_t>();
  o.approx = a.at("approx").get<bool>();
  o.restarts = a.at("restarts").get<int>();
  o.cap = a.at("cap").get<int>();
  const SweepResult r = pareto_sweep(scen, o);
  json artifacts = json::array();
  write_text(dir, "pareto.csv", sweep_csv(r), artifacts);
  size_t front = 0;
  for (auto f : r.on_frontier) front += f;
  log << fmt::format("pareto.csv: {} weights, {} on the frontier{}\n", r.points.size(), front,
                     r.approximate ? " (approximate oracle)" : "");
  return artifacts;
}

json cmd_train(const json& a, const fs::path& dir, std::ostream& log) {
  const auto scen = scenario_from_args(a);
  TrainOptions o;
  o.kind = agent_kind_from_string(a.at("agent").get<std::string>());
  o.episodes = a.at("episodes").get<int>();
  o.seed = a.at("seed").get<uint64_t>();
  o.config = AgentConfig::from_json(a.at("agent_config"));
  const std::string tag = to_string(o.kind);
  const bool verbose = a.value("verbose", false);
  TrainResult r = train(scen, o, [&](const LearningRow& row) {
    if (verbose && (row.episode + 1) % 50 == 0)
      log << fmt::format("episode {}: reward {:.4f}, dv {:.1f}%\n", row.episode + 1,
                         row.mean_reward, row.dv_pct);
  });
  json artifacts = json::array();
  write_text(dir, fmt::format("checkpoint_{}.json", tag), r.agent->to_json().dump() + "\n",
             artifacts);
  write_text(dir, fmt::format("learning_curve_{}.csv", tag), learning_curve_csv(r.curve),
             artifacts);
  if (!r.curve.empty())
    log << fmt::format("{}: {} episodes, final mean reward {:.4f}\n", tag, r.curve.size(),
                       r.curve.back().mean_reward);
  return artifacts;
}

std::string steps_csv(const EvalResult& r) {
  std::string out = r.oracle_step_rewards.empty() ? "step,reward\n" : "step,reward,oracle_reward\n";
  for (size_t i = 0; i < r.outcomes.size(); ++i) {
    out += fmt::format("{},{}", i, format_double(r.outcomes[i].reward));
    if (!r.oracle_step_rewards.empty()) out += "," + format_double(r.oracle_step_rewards[i]);
    out += "\n";
  }
  return out;
}

json cmd_eval(const json& a, const fs::path& dir, std::ostream& log) {
  const auto scen = scenario_from_args(a);
  std::unique_ptr<Agent> agent;
  if (a.contains("checkpoint") && !a.at("checkpoint").is_null()) {
    const json ckpt = json::parse(read_file(a.at("checkpoint").get<std::string>()));
    agent = load_agent(ckpt, *scen);
  } else {
    agent = make_agent(agent_kind_from_string(a.at("agent").get<std::string>()), *scen,
                       AgentConfig::from_json(a.at("agent_config")), a.at("seed").get<uint64_t>());
  }
  EvalOptions o;
  o.episodes = a.at("episodes").get<int>();
  o.seed = a.at("seed").get<uint64_t>();
  o.cap = a.at("cap").get<int>();
  o.with_oracle = a.at("oracle").get<bool>() && scen->config.users <= o.cap;
  const EvalResult r = evaluate(*agent, scen, o);
  const std::string tag = to_string(agent->kind());
  std::vector<std::pair<std::string, EpisodeSummary>> rows{{tag, r.summary}};
  if (r.oracle_summary) rows.emplace_back("oracle", *r.oracle_summary);
  json artifacts = json::array();
  write_text(dir, fmt::format("metrics_{}.csv", tag), metrics_csv(r.outcomes), artifacts);
  write_text(dir, fmt::format("steps_{}.csv", tag), steps_csv(r), artifacts);
  write_text(dir, fmt::format("summary_{}.csv", tag), summary_csv(rows, scen->config.users),
             artifacts);
  for (const auto& [name, s] : rows)
    log << fmt::format("{:>8}: reward {:.4f}  PSNR {:.2f} dB  RT {:.4f} s  EC {:.4f} J  DV {:.1f}%\n",
                       name, s.mean_reward, s.psnr_db.mean, s.rt_s.mean, s.energy_j.mean, s.dv_pct);
  return artifacts;
}

json dispatch(const std::string& command, const json& args, const fs::path& dir,
              std::ostream& log) {
  if (command == "gen-traces") return cmd_gen_traces(args, dir, log);
  if (command == "gen-manifest") return cmd_gen_manifest(args, dir, log);
  if (command == "gen-headtrace") return cmd_gen_headtrace(args, dir, log);
  if (command == "gen-scenario") return cmd_gen_scenario(args, dir, log);
  if (command == "pareto") return cmd_pareto(args, dir, log);
  if (command == "train") return cmd_train(args, dir, log);
  if (command == "eval") return cmd_eval(args, dir, log);
  throw UsageError("unknown command '" + command + "'");
}

// Scenario file with absolute asset paths and flag overrides applied.
json resolve_scenario(const std::string& config_path, const json& overrides) {
  if (config_path.empty()) throw UsageError("--config is required");
  if (!fs::exists(config_path))
    throw UsageError(fmt::format("config file '{}' does not exist", config_path));
  ScenarioFile f = parse_scenario_file(config_path);
  const fs::path base = fs::absolute(f.base_dir);
  auto abs = [&](std::string& p) {
    if (!fs::path(p).is_absolute()) p = (base / p).lexically_normal().string();
  };
  for (auto& u : f.users) {
    abs(u.manifest);
    abs(u.head_trace);
  }
  for (auto& c : f.channels) {
    abs(c.uplink);
    abs(c.downlink);
  }
  json j = scenario_file_json(f);
  for (const auto& [key, value] : overrides.items()) {
    if (key == "weights") {
      j["weights"] = {{"w0", value[0]}, {"w1", value[1]}, {"w2", value[2]}};
    } else {
      j[key] = value;
    }
  }
  return j;
}

}  // namespace

json execute(const std::string& command, const json& args, std::ostream& log) {
  const fs::path dir = output_dir(args);
  json artifacts = dispatch(command, args, dir, log);
  json manifest = {{"command", command},
                   {"version", kVersion},
                   {"seed", args.value("seed", uint64_t{0})},
                   {"args", args},
                   {"artifacts", artifacts}};
  if (args.contains("scenario")) manifest["config"] = args.at("scenario");
  write_file_atomic(dir / (command + ".manifest.json"), manifest.dump(2) + "\n");
  return manifest;
}

json replay(const fs::path& path, const fs::path& out_dir, std::ostream& log) {
  if (!fs::exists(path)) throw UsageError(fmt::format("manifest '{}' does not exist", path.string()));
  json manifest = json::parse(read_file(path));
  json args = manifest.at("args");
  if (!out_dir.empty()) args["out"] = out_dir.string();
  return execute(manifest.at("command").get<std::string>(), args, log);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trace-driven simulator and learning lab for elastic 360-degree video offloading",
               "eto"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Common {
    uint64_t seed = 1;
    std::string out = ".";
  };
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", common.out, "Existing output directory")->capture_default_str();
  };

  // Scenario-bound options.
  std::string config;
  std::vector<double> weights;
  int episode_length = 0;
  double deadline = 0.0;
  auto add_scenario = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Scenario JSON file")->required();
    sub->add_option("--weights", weights, "Objective weights w0 w1 w2")->expected(3);
    sub->add_option("--episode-length", episode_length, "Override the episode length");
    sub->add_option("--deadline", deadline, "Override the deadline in seconds");
  };
  auto overrides = [&]() {
    json o = json::object();
    if (!weights.empty()) o["weights"] = weights;
    if (episode_length > 0) o["episode_length"] = episode_length;
    if (deadline > 0.0) o["deadline_s"] = deadline;
    return o;
  };

  std::string tech = "5g";
  double horizon = 120.0, step = 0.1;
  auto* gen_traces = app.add_subcommand("gen-traces", "Generate an uplink/downlink trace pair");
  add_common(gen_traces);
  gen_traces->add_option("--tech", tech, "4g, 5g or wigig")->capture_default_str();
  gen_traces->add_option("--horizon", horizon, "Trace length in seconds")->capture_default_str();
  gen_traces->add_option("--step", step, "Sample spacing in seconds")->capture_default_str();

  int rows = 4, cols = 8, layers = 7, segments = 36;
  double base_bits = SizeProfile{}.base_tile_bits, enh_bits = SizeProfile{}.enhancement_bits;
  std::string video_id = "manifest";
  auto add_video = [&](CLI::App* sub) {
    sub->add_option("--rows", rows, "Tile rows H")->capture_default_str();
    sub->add_option("--cols", cols, "Tile columns V")->capture_default_str();
    sub->add_option("--layers", layers, "Enhancement layers L")->capture_default_str();
    sub->add_option("--segments", segments, "Segments per video")->capture_default_str();
    sub->add_option("--base-tile-bits", base_bits, "Mean base-layer tile size")->capture_default_str();
    sub->add_option("--enhancement-bits", enh_bits, "Mean first enhancement tile size")
        ->capture_default_str();
  };
  auto* gen_manifest = app.add_subcommand("gen-manifest", "Generate a synthetic video manifest");
  add_common(gen_manifest);
  add_video(gen_manifest);
  gen_manifest->add_option("--id", video_id, "Video id and file stem")->capture_default_str();

  double yaw_step = 20.0, pitch_step = 8.0;
  auto* gen_head = app.add_subcommand("gen-headtrace", "Generate a random-walk head trace");
  add_common(gen_head);
  gen_head->add_option("--segments", segments, "Samples, one per segment")->capture_default_str();
  gen_head->add_option("--yaw-step", yaw_step, "Yaw step in degrees")->capture_default_str();
  gen_head->add_option("--pitch-step", pitch_step, "Pitch step in degrees")->capture_default_str();

  int users = 3, channels = 3;
  std::vector<double> constant_mbps;
  std::vector<std::string> techs;
  double gen_deadline = 1.0;
  int gen_length = 36;
  int gen_min_level = 0;
  auto* gen_scen = app.add_subcommand("gen-scenario", "Generate a complete synthetic scenario");
  add_common(gen_scen);
  add_video(gen_scen);
  gen_scen->add_option("--users", users, "Users K")->capture_default_str();
  gen_scen->add_option("--channels", channels, "Channels C")->capture_default_str();
  gen_scen->add_option("--constant-uplink-mbps", constant_mbps,
                       "Constant uplink rate per channel instead of generated traces");
  gen_scen->add_option("--technologies", techs, "Technology per channel");
  gen_scen->add_option("--deadline", gen_deadline, "Deadline in seconds")->capture_default_str();
  gen_scen->add_option("--episode-length", gen_length, "Steps per episode")->capture_default_str();
  gen_scen->add_option("--min-level", gen_min_level, "Lowest selectable level (1 drops base-only)")
      ->capture_default_str();

  int n_weights = 10000, restarts = 4, cap = kDefaultBruteForceCap;
  bool approx = false;
  auto* pareto = app.add_subcommand("pareto", "Sweep objective weights with the oracle");
  add_common(pareto);
  add_scenario(pareto);
  pareto->add_option("--n-weights", n_weights, "Weight vectors to sample")->capture_default_str();
  pareto->add_flag("--approx", approx, "Use coordinate ascent instead of enumeration");
  pareto->add_option("--restarts", restarts, "Coordinate-ascent restarts")->capture_default_str();
  pareto->add_option("--cap", cap, "Largest K enumerated exhaustively")->capture_default_str();

  std::string agent = "ippg", agent_config_path, checkpoint;
  int episodes = 500;
  int e_fix = -1;
  double cppg_mult = 1.0;
  bool verbose = false, no_oracle = false;
  auto add_agent = [&](CLI::App* sub) {
    sub->add_option("--agent", agent, "cppg, ippg, egreedy or ea")
        ->check(CLI::IsMember({"cppg", "ippg", "egreedy", "ea"}))
        ->capture_default_str();
    sub->add_option("--agent-config", agent_config_path, "JSON file of agent settings");
    sub->add_option("--e-fix", e_fix, "Pinned level for ea (default: middle level)");
    sub->add_option("--cppg-episode-multiplier", cppg_mult, "CPPG episode budget multiplier")
        ->capture_default_str();
  };
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  add_common(train_cmd);
  add_scenario(train_cmd);
  add_agent(train_cmd);
  train_cmd->add_option("--episodes", episodes, "Training episodes")->capture_default_str();
  train_cmd->add_flag("--verbose", verbose, "Print progress every 50 episodes");

  int eval_episodes = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  add_common(eval_cmd);
  add_scenario(eval_cmd);
  add_agent(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON (omit for a fresh agent)");
  eval_cmd->add_option("--episodes", eval_episodes, "Evaluation episodes")->capture_default_str();
  eval_cmd->add_flag("--no-oracle", no_oracle, "Skip the oracle column");
  eval_cmd->add_option("--cap", cap, "Largest K enumerated exhaustively")->capture_default_str();

  std::string manifest_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a command from its run manifest");
  replay_cmd->add_option("manifest", manifest_path, "Run manifest JSON")->required();
  replay_cmd->add_option("--out", common.out, "Output directory (default: as recorded)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    auto agent_config = [&]() {
      json j = agent_config_path.empty() ? AgentConfig{}.to_json()
                                         : json::parse(read_file(agent_config_path));
      AgentConfig c = AgentConfig::from_json(j);
      if (e_fix >= 0) c.e_fix = e_fix;
      c.cppg_episode_multiplier = cppg_mult;
      c.validate();
      return c.to_json();
    };
    json args = {{"seed", common.seed}, {"out", common.out}};
    std::string command;
    if (gen_traces->parsed()) {
      command = "gen-traces";
      args.update({{"tech", tech}, {"horizon", horizon}, {"step", step}});
    } else if (gen_manifest->parsed()) {
      command = "gen-manifest";
      args.update({{"rows", rows}, {"cols", cols}, {"layers", layers}, {"segments", segments},
                   {"base_tile_bits", base_bits}, {"enhancement_bits", enh_bits},
                   {"id", video_id}});
    } else if (gen_head->parsed()) {
      command = "gen-headtrace";
      args.update({{"segments", segments}, {"yaw_step", yaw_step}, {"pitch_step", pitch_step}});
    } else if (gen_scen->parsed()) {
      command = "gen-scenario";
      args.update({{"rows", rows}, {"cols", cols}, {"layers", layers}, {"segments", segments},
                   {"base_tile_bits", base_bits}, {"enhancement_bits", enh_bits},
                   {"users", users}, {"channels", channels},
                   {"constant_uplink_mbps", constant_mbps}, {"technologies", techs},
                   {"deadline", gen_deadline}, {"episode_length", gen_length},
                   {"min_level", gen_min_level}});
    } else if (pareto->parsed()) {
      command = "pareto";
      args.update({{"scenario", resolve_scenario(config, overrides())},
                   {"n_weights", n_weights}, {"approx", approx}, {"restarts", restarts},
                   {"cap", cap}});
    } else if (train_cmd->parsed()) {
      command = "train";
      args.update({{"scenario", resolve_scenario(config, overrides())}, {"agent", agent},
                   {"episodes", episodes}, {"agent_config", agent_config()},
                   {"verbose", verbose}});
    } else if (eval_cmd->parsed()) {
      command = "eval";
      args.update({{"scenario", resolve_scenario(config, overrides())}, {"agent", agent},
                   {"episodes", eval_episodes}, {"agent_config", agent_config()},
                   {"oracle", !no_oracle}, {"cap", cap}});
      if (!checkpoint.empty()) {
        if (!fs::exists(checkpoint))
          throw UsageError(fmt::format("checkpoint '{}' does not exist", checkpoint));
        args["checkpoint"] = fs::absolute(checkpoint).lexically_normal().string();
      }
    } else if (replay_cmd->parsed()) {
      const bool out_given = replay_cmd->count("--out") > 0;
      replay(manifest_path, out_given ? fs::path(common.out) : fs::path(), out);
      return 0;
    }
    execute(command, args, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace eto::cli
