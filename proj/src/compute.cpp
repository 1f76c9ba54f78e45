#include "eto/compute.hpp"

#include <cassert>

namespace eto {

std::vector<double> mec_allocate(std::span<const double> intensities, double z_mec_bps) {
  assert(!intensities.empty());
  double total = 0.0;
  for (double i : intensities) total += i;
  std::vector<double> speeds(intensities.size());
  for (size_t k = 0; k < intensities.size(); ++k)
    speeds[k] = z_mec_bps * (intensities[k] / total);
  return speeds;
}

}  // namespace eto
