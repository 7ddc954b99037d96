#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

int Binning::bin(double v) const {
  if (std::isnan(v)) throw DomainError("binning: NaN value");
  // bin b holds cuts[b-1] < v <= cuts[b]
  return static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

Binning bin_covariate(const std::vector<double>& values, int n_bins, const std::vector<bool>* mask) {
  if (n_bins < 1) throw ParameterError("binning: n_bins must be positive");
  if (mask && mask->size() != values.size()) throw DimensionError("binning: mask length differs from values");
  std::vector<double> v;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (std::isnan(values[i])) continue;
    v.push_back(values[i]);
  }
  if (v.empty()) throw DomainError("binning: no values to compute edges from");
  std::sort(v.begin(), v.end());
  Binning out;
  const std::size_t m = v.size();
  for (int b = 1; b < n_bins; ++b) {
    // upper edge of bin b-1: the largest value in the first b/n_bins share
    const std::size_t idx = (static_cast<std::size_t>(b) * m + n_bins - 1) / n_bins;  // ceil(b m / n)
    const double cut = v[std::min(idx, m) - 1];
    if (!out.cuts.empty() && cut <= out.cuts.back()) {
      out.collapsed = true;
      continue;
    }
    if (cut >= v.back()) {
      out.collapsed = true;
      continue;
    }
    out.cuts.push_back(cut);
  }
  if (out.collapsed)
    std::cerr << "warning: binning collapsed duplicate edges, " << out.n_bins() << " of " << n_bins
              << " bins kept\n";
  return out;
}

}  // namespace firecast::latent
