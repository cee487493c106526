#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/params.hpp"

namespace fgb::gbdt {

// Quantized feature matrix for histogram split finding. Bin ordinals are
// stored feature-major so a histogram pass over one feature is a contiguous
// scan. Bounds are placed at midpoints between distinct values, so equal raw
// values always land in the same bin no matter how rows are ordered.
class BinnedDataset {
  public:
    BinnedDataset() = default;

    std::size_t n_samples() const { return n_samples_; }
    std::size_t n_features() const { return n_features_; }

    // Number of bins for a feature (bounds are the internal thresholds).
    std::size_t bin_count(std::size_t feature) const {
        return bounds_[feature].size() + 1;
    }

    const std::vector<double>& bin_upper_bounds(std::size_t feature) const {
        return bounds_[feature];
    }

    std::uint16_t bin(std::size_t sample, std::size_t feature) const {
        return bins_[feature * n_samples_ + sample];
    }

    // Contiguous per-feature column of bin ordinals.
    const std::uint16_t* feature_column(std::size_t feature) const {
        return bins_.data() + feature * n_samples_;
    }

    // Bin of a raw value under this feature's stored bounds: the first bin
    // whose upper bound is >= x, matching "go left iff x <= threshold".
    std::uint16_t bin_of_value(std::size_t feature, double x) const {
        const auto& b = bounds_[feature];
        return static_cast<std::uint16_t>(
            std::lower_bound(b.begin(), b.end(), x) - b.begin());
    }

    friend BinnedDataset bin_features(const Matrix& features, std::uint32_t max_bins);

  private:
    std::size_t n_samples_ = 0;
    std::size_t n_features_ = 0;
    std::vector<std::uint16_t> bins_;          // feature-major, n_features x n_samples
    std::vector<std::vector<double>> bounds_;  // per feature, strictly increasing
};

// Equal-frequency binning with at most max_bins bins per feature. Cut ranks
// are extended over runs of equal values so a tie never straddles a bound;
// the result depends only on the multiset of column values.
inline BinnedDataset bin_features(const Matrix& features, std::uint32_t max_bins) {
    check(features.rows() >= 1 && features.cols() >= 1,
          "bin_features: empty matrix");
    check(max_bins >= 2 && max_bins <= 65535, "bin_features: max_bins out of range");

    const std::size_t n = features.rows();
    const std::size_t p = features.cols();

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            check(std::isfinite(features(i, j)),
                  "bin_features: non-finite value at row " + std::to_string(i) +
                      ", feature " + std::to_string(j));

    BinnedDataset out;
    out.n_samples_ = n;
    out.n_features_ = p;
    out.bins_.resize(n * p);
    out.bounds_.resize(p);

    std::vector<double> sorted(n);
    const std::size_t width = (n + max_bins - 1) / max_bins;  // ceil(n / max_bins)

    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) sorted[i] = features(i, j);
        std::sort(sorted.begin(), sorted.end());

        auto& bounds = out.bounds_[j];
        bounds.clear();
        std::size_t i = 0;
        while (i < n) {
            std::size_t last = std::min(i + width, n) - 1;
            while (last + 1 < n && sorted[last + 1] == sorted[last]) ++last;
            if (last + 1 < n) {
                double lo = sorted[last];
                double hi = sorted[last + 1];
                double mid = lo + (hi - lo) * 0.5;
                // Adjacent representable values can collapse the midpoint;
                // merge rather than emit a non-increasing bound.
                if (bounds.empty() || mid > bounds.back()) bounds.push_back(mid);
            }
            i = last + 1;
        }
        check(bounds.size() + 1 <= max_bins, "bin_features: bound construction overflow");

        std::uint16_t* col = out.bins_.data() + j * n;
        for (std::size_t r = 0; r < n; ++r) col[r] = out.bin_of_value(j, features(r, j));
    }
    return out;
}

}  // namespace fgb::gbdt
