#ifndef ETO_COMPUTE_HPP_
#define ETO_COMPUTE_HPP_

#include <span>
#include <vector>

namespace eto {

struct ComputeParams {
  double kappa = 1e-27;          // CPU capacitance factor
  double f_vr_hz = 2.4e9;        // headset CPU frequency
  double z_mec_bps = 12e9;       // total MEC computing speed
  double z_user_bps = 200e6;     // nominal headset speed, only used to calibrate beta

  // Intensity at which a headset processes z_user_bps: f_vr / Z_k.
  double reference_intensity() const { return f_vr_hz / z_user_bps; }
};

// T = S * I / f
inline double local_compute_time(double bits, double intensity, double freq_hz) {
  return bits * intensity / freq_hz;
}

// E = kappa * S * I * f^2
inline double local_compute_energy(double bits, double intensity, double freq_hz,
                                   double kappa) {
  return kappa * bits * intensity * freq_hz * freq_hz;
}

// Splits the MEC speed across offloaders in proportion to their intensity.
// `intensities` must be non-empty with positive entries.
std::vector<double> mec_allocate(std::span<const double> intensities, double z_mec_bps);

// Computation speed is z = f / I, so S * I / f == S / z.
inline double mec_compute_time(double bits, double speed_bps) { return bits / speed_bps; }

}  // namespace eto

#endif  // ETO_COMPUTE_HPP_
