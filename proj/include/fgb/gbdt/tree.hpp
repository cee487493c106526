#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/binning.hpp"
#include "fgb/gbdt/objective.hpp"
#include "fgb/gbdt/params.hpp"

namespace fgb::gbdt {

namespace detail {

// Gradients are accumulated as fixed-point integers so histogram sums are
// exact: independent of row order, and parent - left == right without
// rounding. 2^40 keeps quantization at ~1e-12 while leaving headroom for
// sums over millions of rows.
constexpr double kGradQuantScale = 1099511627776.0;  // 2^40
constexpr double kGradDequantScale = 1.0 / kGradQuantScale;

inline std::int64_t quantize_gradient(double v) {
    return std::llround(v * kGradQuantScale);
}

inline double dequantize(std::int64_t q) {
    return static_cast<double>(q) * kGradDequantScale;
}

struct HistBin {
    std::int64_t grad = 0;
    std::int64_t hess = 0;
    std::int64_t count = 0;
};

}  // namespace detail

struct TreeNode {
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::uint32_t feature = 0;
    std::uint16_t split_bin = 0;  // go left iff bin <= split_bin
    double threshold = 0.0;       // raw-value equivalent of split_bin
    double value = 0.0;           // leaf weight, unscaled by learning rate

    bool is_leaf() const { return left < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::uint32_t root = 0;

    double route(const double* row) const {
        const TreeNode* node = &nodes[root];
        while (!node->is_leaf())
            node = &nodes[static_cast<std::size_t>(
                row[node->feature] <= node->threshold ? node->left : node->right)];
        return node->value;
    }

    std::uint32_t leaf_count() const {
        std::uint32_t c = 0;
        for (const auto& n : nodes) c += n.is_leaf() ? 1u : 0u;
        return c;
    }

    bool operator==(const Tree&) const = default;
};

namespace detail {

struct SplitCandidate {
    double gain = 0.0;
    std::uint32_t feature = 0;
    std::uint16_t bin = 0;
    std::int64_t grad_left = 0;
    std::int64_t hess_left = 0;
    std::int64_t count_left = 0;
    bool valid = false;
};

// One leaf awaiting a split decision during best-first growth.
struct LeafState {
    std::uint32_t node = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::int64_t grad = 0;
    std::int64_t hess = 0;
    int hist = -1;  // pool slot
    SplitCandidate best;
    bool open = true;
};

class HistogramPool {
  public:
    HistogramPool(std::size_t total_bins) : total_bins_(total_bins) {}

    int acquire() {
        int slot;
        if (!free_.empty()) {
            slot = free_.back();
            free_.pop_back();
        } else {
            slot = static_cast<int>(slots_.size());
            slots_.emplace_back(total_bins_);
        }
        std::fill(slots_[static_cast<std::size_t>(slot)].begin(),
                  slots_[static_cast<std::size_t>(slot)].end(), HistBin{});
        return slot;
    }

    void release(int slot) { free_.push_back(slot); }

    HistBin* data(int slot) { return slots_[static_cast<std::size_t>(slot)].data(); }

  private:
    std::size_t total_bins_;
    std::vector<std::vector<HistBin>> slots_;
    std::vector<int> free_;
};

}  // namespace detail

// Best-first (leaf-wise) histogram tree growth. Repeatedly splits the open
// leaf with the highest positive gain until max_leaves is reached or no
// candidate improves the objective. Ties break toward the lowest feature
// index, then the lowest bin, then the earliest-created leaf. When
// leaf_of_sample is given it receives the final leaf node index per sample.
inline Tree grow_tree(const BinnedDataset& binned, const std::vector<double>& grad,
                      const std::vector<double>& hess, const GbdtParams& params,
                      std::vector<std::uint32_t>* leaf_of_sample = nullptr) {
    using namespace detail;

    const std::size_t n = binned.n_samples();
    const std::size_t p = binned.n_features();
    check(n >= 1, "grow_tree: empty dataset");
    check(grad.size() == n && hess.size() == n, "grow_tree: gradient size mismatch");

    double max_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        check(std::isfinite(grad[i]) && std::isfinite(hess[i]),
              "grow_tree: non-finite gradient");
        max_abs = std::max(max_abs, std::max(std::abs(grad[i]), std::abs(hess[i])));
    }
    check((max_abs + 1.0) * kGradQuantScale * static_cast<double>(n) < 4.6e18,
          "grow_tree: gradient magnitude exceeds accumulator range");

    std::vector<std::int64_t> gq(n), hq(n);
    for (std::size_t i = 0; i < n; ++i) {
        gq[i] = quantize_gradient(grad[i]);
        hq[i] = quantize_gradient(hess[i]);
    }

    std::vector<std::size_t> offsets(p + 1, 0);
    for (std::size_t f = 0; f < p; ++f) offsets[f + 1] = offsets[f] + binned.bin_count(f);
    const std::size_t total_bins = offsets[p];

    std::vector<std::uint32_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<std::uint32_t>(i);
    std::vector<std::uint32_t> scratch(n);

    HistogramPool pool(total_bins);

    auto build_hist = [&](int slot, std::size_t begin, std::size_t end) {
        HistBin* hist = pool.data(slot);
        for (std::size_t f = 0; f < p; ++f) {
            const std::uint16_t* col = binned.feature_column(f);
            HistBin* fh = hist + offsets[f];
            for (std::size_t i = begin; i < end; ++i) {
                std::uint32_t s = indices[i];
                HistBin& b = fh[col[s]];
                b.grad += gq[s];
                b.hess += hq[s];
                b.count += 1;
            }
        }
    };

    const double lambda = params.l2_lambda;
    const std::int64_t min_leaf = static_cast<std::int64_t>(params.min_samples_leaf);

    auto scan_best = [&](const LeafState& leaf) {
        SplitCandidate best;
        std::int64_t total_count = static_cast<std::int64_t>(leaf.end - leaf.begin);
        if (total_count < 2 * min_leaf) return best;
        const HistBin* hist = pool.data(leaf.hist);
        const double parent_term =
            dequantize(leaf.grad) * dequantize(leaf.grad) / (dequantize(leaf.hess) + lambda);
        for (std::size_t f = 0; f < p; ++f) {
            const std::size_t bins = binned.bin_count(f);
            if (bins < 2) continue;
            const HistBin* fh = hist + offsets[f];
            std::int64_t gl = 0, hl = 0, cl = 0;
            for (std::size_t b = 0; b + 1 < bins; ++b) {
                gl += fh[b].grad;
                hl += fh[b].hess;
                cl += fh[b].count;
                if (cl < min_leaf) continue;
                if (total_count - cl < min_leaf) break;
                double gld = dequantize(gl);
                double hld = dequantize(hl);
                double grd = dequantize(leaf.grad - gl);
                double hrd = dequantize(leaf.hess - hl);
                double gain = 0.5 * (gld * gld / (hld + lambda) + grd * grd / (hrd + lambda) -
                                     parent_term);
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<std::uint32_t>(f);
                    best.bin = static_cast<std::uint16_t>(b);
                    best.grad_left = gl;
                    best.hess_left = hl;
                    best.count_left = cl;
                    best.valid = true;
                }
            }
        }
        return best;
    };

    Tree tree;
    tree.root = 0;
    tree.nodes.emplace_back();

    std::vector<LeafState> leaves;
    {
        LeafState root;
        root.node = 0;
        root.begin = 0;
        root.end = n;
        for (std::size_t i = 0; i < n; ++i) {
            root.grad += gq[i];
            root.hess += hq[i];
        }
        root.hist = pool.acquire();
        build_hist(root.hist, 0, n);
        root.best = scan_best(root);
        leaves.push_back(root);
    }

    std::uint32_t n_leaves = 1;
    while (n_leaves < params.max_leaves) {
        int pick = -1;
        double best_gain = 0.0;
        for (std::size_t li = 0; li < leaves.size(); ++li) {
            const LeafState& ls = leaves[li];
            if (ls.open && ls.best.valid && ls.best.gain > best_gain) {
                best_gain = ls.best.gain;
                pick = static_cast<int>(li);
            }
        }
        if (pick < 0) break;

        LeafState parent = leaves[static_cast<std::size_t>(pick)];
        leaves[static_cast<std::size_t>(pick)].open = false;
        const SplitCandidate& sp = parent.best;

        // Stable partition of the parent's index range.
        const std::uint16_t* col = binned.feature_column(sp.feature);
        std::size_t w = parent.begin;
        std::size_t r = 0;
        for (std::size_t i = parent.begin; i < parent.end; ++i) {
            std::uint32_t s = indices[i];
            if (col[s] <= sp.bin)
                indices[w++] = s;
            else
                scratch[r++] = s;
        }
        std::size_t mid = w;
        for (std::size_t i = 0; i < r; ++i) indices[mid + i] = scratch[i];

        std::uint32_t left_node = static_cast<std::uint32_t>(tree.nodes.size());
        std::uint32_t right_node = left_node + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& pn = tree.nodes[parent.node];
        pn.left = static_cast<std::int32_t>(left_node);
        pn.right = static_cast<std::int32_t>(right_node);
        pn.feature = sp.feature;
        pn.split_bin = sp.bin;
        pn.threshold = binned.bin_upper_bounds(sp.feature)[sp.bin];

        LeafState left, right;
        left.node = left_node;
        left.begin = parent.begin;
        left.end = mid;
        left.grad = sp.grad_left;
        left.hess = sp.hess_left;
        right.node = right_node;
        right.begin = mid;
        right.end = parent.end;
        right.grad = parent.grad - sp.grad_left;
        right.hess = parent.hess - sp.hess_left;

        // Build the smaller child's histogram directly; derive the larger by
        // integer subtraction into the parent's slot (exact).
        bool left_smaller = (mid - parent.begin) <= (parent.end - mid);
        LeafState& small = left_smaller ? left : right;
        LeafState& large = left_smaller ? right : left;
        small.hist = pool.acquire();
        build_hist(small.hist, small.begin, small.end);
        large.hist = parent.hist;
        {
            HistBin* ph = pool.data(large.hist);
            const HistBin* sh = pool.data(small.hist);
            for (std::size_t b = 0; b < total_bins; ++b) {
                ph[b].grad -= sh[b].grad;
                ph[b].hess -= sh[b].hess;
                ph[b].count -= sh[b].count;
            }
        }

        left.best = scan_best(left);
        right.best = scan_best(right);
        if (!left.best.valid) pool.release(left.hist), left.hist = -1;
        if (!right.best.valid) pool.release(right.hist), right.hist = -1;
        leaves.push_back(left);
        leaves.push_back(right);
        ++n_leaves;
    }

    if (leaf_of_sample) leaf_of_sample->assign(n, 0);
    for (const LeafState& ls : leaves) {
        if (!ls.open) continue;
        tree.nodes[ls.node].value = -dequantize(ls.grad) / (dequantize(ls.hess) + lambda);
        if (leaf_of_sample)
            for (std::size_t i = ls.begin; i < ls.end; ++i)
                (*leaf_of_sample)[indices[i]] = ls.node;
    }
    return tree;
}

}  // namespace fgb::gbdt
