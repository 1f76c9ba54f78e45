#include "eto/network.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eto/util.hpp"

namespace eto {

std::string to_string(Technology tech) {
  switch (tech) {
    case Technology::k4G: return "4G";
    case Technology::k5G: return "5G";
    case Technology::kWiGig: return "WiGig";
  }
  return "?";
}

Technology technology_from_string(const std::string& text) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "4g" || t == "lte") return Technology::k4G;
  if (t == "5g" || t == "nr") return Technology::k5G;
  if (t == "wigig" || t == "60ghz") return Technology::kWiGig;
  throw std::invalid_argument("unknown technology '" + text + "' (expected 4g, 5g, wigig)");
}

std::string to_string(Direction dir) {
  return dir == Direction::kUplink ? "uplink" : "downlink";
}

double ChannelTrace::rate_at(double t) const {
  auto it = std::upper_bound(samples.begin(), samples.end(), t,
                             [](double v, const RateSample& s) { return v < s.time_s; });
  if (it == samples.begin()) return samples.front().rate_bps;
  return std::prev(it)->rate_bps;
}

double ChannelTrace::mean_rate() const {
  if (samples.size() == 1) return samples.front().rate_bps;
  double area = 0.0;
  for (size_t i = 0; i + 1 < samples.size(); ++i)
    area += samples[i].rate_bps * (samples[i + 1].time_s - samples[i].time_s);
  return area / samples.back().time_s;
}

ChannelTrace constant_trace(double rate_bps, Technology tech) {
  ChannelTrace t;
  t.technology = tech;
  t.samples.push_back({0.0, rate_bps});
  return t;
}

void validate(const ChannelTrace& trace) {
  if (trace.samples.empty()) throw std::invalid_argument("trace has no samples");
  if (trace.samples.front().time_s != 0.0)
    throw std::invalid_argument("trace must start at t=0");
  for (size_t i = 0; i < trace.samples.size(); ++i) {
    if (!(trace.samples[i].rate_bps >= 0.0) || !std::isfinite(trace.samples[i].rate_bps))
      throw std::invalid_argument(fmt::format("trace sample {} has invalid rate", i));
    if (i > 0 && !(trace.samples[i].time_s > trace.samples[i - 1].time_s))
      throw std::invalid_argument(fmt::format("trace times not increasing at sample {}", i));
  }
}

std::optional<double> transfer_time(const ChannelTrace& trace, double start_s, double bits) {
  if (bits <= 0.0) return 0.0;
  const auto& s = trace.samples;
  auto it = std::upper_bound(s.begin(), s.end(), start_s,
                             [](double v, const RateSample& x) { return v < x.time_s; });
  size_t i = it == s.begin() ? 0 : static_cast<size_t>(std::prev(it) - s.begin());
  double pos = start_s;
  double remaining = bits;
  while (true) {
    const double rate = s[i].rate_bps;
    const bool last = i + 1 == s.size();
    if (last) {
      if (rate <= 0.0) return std::nullopt;
      return (pos - start_s) + remaining / rate;
    }
    const double seg_end = s[i + 1].time_s;
    const double capacity = rate * (seg_end - pos);
    if (rate > 0.0 && capacity >= remaining) return (pos - start_s) + remaining / rate;
    remaining -= capacity;
    pos = seg_end;
    ++i;
  }
}

double default_tx_coeff(Technology tech) {
  switch (tech) {
    case Technology::k4G: return kTx4GMwPerMbps;
    case Technology::k5G: return kTx5GMwPerMbps;
    case Technology::kWiGig: return kTxWiGigMwPerMbps;
  }
  return 0.0;
}

double comm_energy(const PowerProfile& profile, int channel, Direction dir, double bits,
                   double /*duration_s*/) {
  const auto& coeffs =
      dir == Direction::kUplink ? profile.tx_mw_per_mbps : profile.rx_mw_per_mbps;
  if (channel < 1 || channel > static_cast<int>(coeffs.size()))
    throw std::out_of_range("channel id out of range for power profile");
  // mW/Mbps = 1e-3 W / 1e6 bit/s = 1e-9 J/bit
  return coeffs[channel - 1] * 1e-9 * bits;
}

TracePreset default_preset(Technology tech) {
  switch (tech) {
    case Technology::k4G:
      return {80e6, 15e6, 0.9, 10e6, 150e6, 0.0, 0, 0, 0.0};
    case Technology::k5G:
      return {450e6, 180e6, 0.8, 20e6, 1000e6, 0.04, 1, 4, 5e6};
    case Technology::kWiGig:
      return {1600e6, 350e6, 0.7, 100e6, 2500e6, 0.06, 1, 3, 20e6};
  }
  return {};
}

ChannelTrace generate_trace(uint64_t seed, Technology tech, double horizon_s, double step_s) {
  return generate_trace(seed, tech, horizon_s, step_s, default_preset(tech));
}

ChannelTrace generate_trace(uint64_t seed, Technology tech, double horizon_s, double step_s,
                            const TracePreset& p) {
  if (!(horizon_s > 0.0) || !(step_s > 0.0))
    throw std::invalid_argument("horizon and step must be positive");
  uint64_t rng = derive_seed(seed, 0x7472616365 + static_cast<uint64_t>(tech));
  ChannelTrace trace;
  trace.technology = tech;
  const auto n = static_cast<size_t>(std::ceil(horizon_s / step_s));
  const double innovation = p.stddev_bps * std::sqrt(1.0 - p.correlation * p.correlation);
  double dev = p.stddev_bps * normal(rng);
  int outage_left = 0;
  for (size_t i = 0; i < n; ++i) {
    double rate = std::clamp(p.mean_bps + dev, p.min_bps, p.max_bps);
    if (outage_left > 0) {
      rate = p.outage_level_bps * uniform01(rng);
      --outage_left;
    } else if (p.outage_prob > 0.0 && uniform01(rng) < p.outage_prob && i + 1 < n) {
      outage_left = p.outage_min_steps +
                    uniform_int(rng, p.outage_max_steps - p.outage_min_steps + 1) - 1;
      rate = p.outage_level_bps * uniform01(rng);
    }
    // The final sample holds forever, so it must never be an outage.
    if (i + 1 == n) rate = std::clamp(p.mean_bps + dev, p.min_bps, p.max_bps);
    trace.samples.push_back({static_cast<double>(i) * step_s, rate});
    dev = p.correlation * dev + innovation * normal(rng);
  }
  return trace;
}

std::string trace_to_csv(const ChannelTrace& trace) {
  std::string out = "time_s,rate_mbps\n";
  for (const auto& s : trace.samples)
    out += fmt::format("{},{}\n", format_double(s.time_s), format_double(s.rate_bps / 1e6));
  return out;
}

void save_trace(const ChannelTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

ChannelTrace load_trace(const std::filesystem::path& path, int channel_id, Direction dir,
                        Technology tech) {
  auto table = parse_csv(read_file(path));
  const int ct = table.column("time_s");
  const int cr = table.column("rate_mbps");
  if (ct < 0 || cr < 0)
    throw std::runtime_error(path.string() + ": trace needs columns time_s,rate_mbps");
  ChannelTrace trace;
  trace.channel_id = channel_id;
  trace.direction = dir;
  trace.technology = tech;
  for (const auto& row : table.rows)
    trace.samples.push_back({std::stod(row[ct]), std::stod(row[cr]) * 1e6});
  try {
    validate(trace);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return trace;
}

void RateHistory::update(int channel, Direction dir, double measured_bps, double alpha) {
  auto& v = dir == Direction::kUplink ? uplink_bps : downlink_bps;
  if (channel < 1 || channel > static_cast<int>(v.size()))
    throw std::out_of_range("channel id out of range for rate history");
  double& avg = v[channel - 1];
  avg = (1.0 - alpha) * avg + alpha * measured_bps;
}

}  // namespace eto
