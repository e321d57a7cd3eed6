// Regenerates the signal-strength calibration table used by synthgen: for
// each target strength, bisects the raw loading until the mean rank IC of
// factor No.1 against the 5-day target matches, averaged over two seeds.
#include <cstdio>

#include "xsect/synthgen.hpp"

int main() {
  const double targets[] = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto ic = [](double loading) {
    double sum = 0.0;
    for (std::uint64_t seed : {1001, 1002}) {
      xsect::SynthSpec spec;
      spec.n_days = 1000;
      spec.seed = seed;
      spec.loading = loading;
      sum += xsect::mean_rank_ic(xsect::generate_panel(spec), 1);
    }
    return sum / 2.0;
  };
  double lo = 0.0;
  for (double t : targets) {
    double hi = lo + 0.02;
    while (hi < 1.0 && ic(hi) < t) hi += 0.02;
    if (hi >= 1.0) {
      std::printf("// %.2f not reached below loading 1.0\n", t);
      break;
    }
    for (int it = 0; it < 30 && hi - lo > 1e-5; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ic(mid) < t ? lo : hi) = mid;
    }
    std::printf("{%.2f, %.5f},\n", t, 0.5 * (lo + hi));
    std::fflush(stdout);
  }
}
