#ifndef ETO_NETWORK_HPP_
#define ETO_NETWORK_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eto {

enum class Direction { kUplink, kDownlink };
enum class Technology { k4G, k5G, kWiGig };

std::string to_string(Technology tech);
Technology technology_from_string(const std::string& text);  // "4g", "5G", "wigig", ...
std::string to_string(Direction dir);

struct RateSample {
  double time_s = 0.0;
  double rate_bps = 0.0;
};

// Piecewise-constant throughput: each sample holds until the next one; the
// last sample holds forever.
struct ChannelTrace {
  int channel_id = 1;
  Direction direction = Direction::kUplink;
  Technology technology = Technology::k4G;
  std::vector<RateSample> samples;

  double rate_at(double t) const;
  // Time-weighted mean over [0, last sample time], or the single rate.
  double mean_rate() const;
  double horizon() const { return samples.back().time_s; }
};

ChannelTrace constant_trace(double rate_bps, Technology tech = Technology::k5G);

// Throws std::invalid_argument on an empty trace, non-increasing times, a
// first sample not at t=0, or negative rates.
void validate(const ChannelTrace& trace);

// Time to push `bits` through the trace starting at `start_s`. Returns
// nullopt when the trace stalls (zero rate from some point on forever).
std::optional<double> transfer_time(const ChannelTrace& trace, double start_s,
                                    double bits);

// Rate-linear power profile in mW per Mbps, indexed by channel id - 1.
struct PowerProfile {
  std::vector<double> tx_mw_per_mbps;
  std::vector<double> rx_mw_per_mbps;
};

inline constexpr double kTx4GMwPerMbps = 57.99;
inline constexpr double kTx5GMwPerMbps = 5.27;
inline constexpr double kTxWiGigMwPerMbps = 6.15;

double default_tx_coeff(Technology tech);

// E = T * P with P = coeff * rate, so E = coeff * bits whatever the duration.
double comm_energy(const PowerProfile& profile, int channel, Direction dir,
                   double bits, double duration_s);

struct TracePreset {
  double mean_bps;
  double stddev_bps;
  double correlation;       // AR(1) coefficient between steps
  double min_bps;
  double max_bps;
  double outage_prob;       // chance per step of entering an outage/fade
  int outage_min_steps;
  int outage_max_steps;
  double outage_level_bps;  // rate ceiling while in outage
};

TracePreset default_preset(Technology tech);

ChannelTrace generate_trace(uint64_t seed, Technology tech, double horizon_s,
                            double step_s);
ChannelTrace generate_trace(uint64_t seed, Technology tech, double horizon_s,
                            double step_s, const TracePreset& preset);

ChannelTrace load_trace(const std::filesystem::path& path, int channel_id,
                        Direction dir, Technology tech);
void save_trace(const ChannelTrace& trace, const std::filesystem::path& path);
std::string trace_to_csv(const ChannelTrace& trace);

// Per-user running averages of observed channel throughput.
struct RateHistory {
  std::vector<double> uplink_bps;    // per channel
  std::vector<double> downlink_bps;  // per channel

  void update(int channel, Direction dir, double measured_bps, double alpha);
};

}  // namespace eto

#endif  // ETO_NETWORK_HPP_
