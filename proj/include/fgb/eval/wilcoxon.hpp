#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fgb/common.hpp"

namespace fgb::eval {

// Two-sided Wilcoxon signed-rank test. Zero differences are dropped
// (classic Wilcoxon, not Pratt), tied absolute values receive average
// ranks. Exact p by full sign-assignment enumeration up to
// kWilcoxonExactLimit effective samples, tie- and continuity-corrected
// normal approximation beyond.
constexpr std::size_t kWilcoxonExactLimit = 20;

struct WilcoxonResult {
    double w_plus = 0.0;
    double p_value = 1.0;
    std::size_t n_effective = 0;
    bool exact = false;
};

inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
    std::vector<double> d;
    d.reserve(diffs.size());
    for (double v : diffs) {
        check(std::isfinite(v), "wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    check(!d.empty(), "wilcoxon: no nonzero differences");
    const std::size_t n = d.size();

    // Doubled average ranks stay integral, so the exact tail counts are
    // computed in exact integer arithmetic even with ties.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(d[a]) < std::abs(d[b]);
    });
    std::vector<std::uint64_t> rank2(n, 0);
    std::vector<std::uint64_t> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const std::uint64_t avg2 = (i + 1) + (j + 1);  // 2 * mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = avg2;
        tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }

    std::uint64_t w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w2 += rank2[i];

    WilcoxonResult result;
    result.n_effective = n;
    result.w_plus = static_cast<double>(w2) / 2.0;

    if (n <= kWilcoxonExactLimit) {
        // dp[s] = number of sign assignments whose doubled positive-rank sum
        // is s. Totals fit easily: sums <= n(n+1) <= 420, counts <= 2^20.
        const std::uint64_t total2 = static_cast<std::uint64_t>(n) * (n + 1);
        std::vector<std::uint64_t> dp(total2 + 1, 0);
        dp[0] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t r = rank2[i];
            for (std::uint64_t s = total2; s >= r; --s) dp[s] += dp[s - r];
        }
        std::uint64_t count_le = 0, count_ge = 0;
        for (std::uint64_t s = 0; s <= total2; ++s) {
            if (s <= w2) count_le += dp[s];
            if (s >= w2) count_ge += dp[s];
        }
        const double denom = std::ldexp(1.0, static_cast<int>(n));  // 2^n, exact
        const double tail = static_cast<double>(std::min(count_le, count_ge)) / denom;
        result.p_value = std::min(1.0, 2.0 * tail);
        result.exact = true;
        return result;
    }

    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
    for (std::uint64_t t : tie_sizes) {
        const double td = static_cast<double>(t);
        variance -= (td * td * td - td) / 48.0;
    }
    const double w = result.w_plus;
    const double continuity = w > mean ? 0.5 : (w < mean ? -0.5 : 0.0);
    const double z = (w - mean - continuity) / std::sqrt(variance);
    result.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    result.exact = false;
    return result;
}

}  // namespace fgb::eval
