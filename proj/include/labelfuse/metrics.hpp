#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "labelfuse/errors.hpp"
#include "labelfuse/matrix.hpp"

namespace labelfuse {

// Ranks 1..n with ties sharing their mean rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos + 1;
        while (end < n && values[order[end]] == values[order[pos]]) ++end;
        double mean_rank = (static_cast<double>(pos + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t k = pos; k < end; ++k) ranks[order[k]] = mean_rank;
        pos = end;
    }
    return ranks;
}

namespace detail {

// Binary AUC by the Mann-Whitney rank formulation; ties count one half.
// Returns false when the class has no positives or no negatives.
inline bool binary_auc(std::span<const double> scores, const std::vector<bool>& positive,
                       double& out) {
    std::size_t n_pos = 0;
    for (bool b : positive) n_pos += b ? 1 : 0;
    std::size_t n_neg = positive.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return false;
    std::vector<double> ranks = average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < positive.size(); ++i)
        if (positive[i]) rank_sum += ranks[i];
    double np = static_cast<double>(n_pos);
    double nn = static_cast<double>(n_neg);
    out = (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
    return true;
}

} // namespace detail

// Unweighted mean of per-class one-vs-rest AUC; classes without both a
// positive and a negative example are skipped.
inline double roc_auc_macro(const Matrix& probabilities, const std::vector<std::size_t>& true_labels) {
    if (probabilities.rows() != true_labels.size())
        throw DimensionMismatch("roc_auc_macro: label count");
    if (probabilities.rows() < 2) throw EmptyInput("roc_auc_macro: need at least 2 samples");
    const std::size_t k = probabilities.cols();
    double total = 0.0;
    std::size_t evaluable = 0;
    std::vector<bool> positive(true_labels.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < true_labels.size(); ++i) positive[i] = true_labels[i] == c;
        std::vector<double> scores = probabilities.column(c);
        double auc;
        if (detail::binary_auc(scores, positive, auc)) {
            total += auc;
            ++evaluable;
        }
    }
    if (evaluable == 0) throw NoEvaluableClass("roc_auc_macro: every class single-valued");
    return total / static_cast<double>(evaluable);
}

// Mean per-class recall over classes that occur in the true labels.
inline double balanced_accuracy(const std::vector<std::size_t>& predicted,
                                const std::vector<std::size_t>& true_labels, std::size_t n_classes) {
    if (predicted.size() != true_labels.size()) throw DimensionMismatch("balanced_accuracy: sizes");
    if (true_labels.empty()) throw EmptyInput("balanced_accuracy: no samples");
    std::vector<double> hits(n_classes, 0.0), counts(n_classes, 0.0);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        if (true_labels[i] >= n_classes || predicted[i] >= n_classes)
            throw IndexOutOfBounds("balanced_accuracy: label >= K");
        counts[true_labels[i]] += 1.0;
        if (predicted[i] == true_labels[i]) hits[true_labels[i]] += 1.0;
    }
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] == 0.0) continue;
        total += hits[c] / counts[c];
        ++present;
    }
    return total / static_cast<double>(present);
}

// Mean absolute error over all (expert, class) cells.
inline double reliability_mae(const Matrix& estimated, const Matrix& hidden) {
    if (estimated.rows() != hidden.rows() || estimated.cols() != hidden.cols())
        throw DimensionMismatch("reliability_mae: shapes");
    if (estimated.rows() == 0 || estimated.cols() == 0)
        throw EmptyInput("reliability_mae: empty matrices");
    double total = 0.0;
    auto a = estimated.flat();
    auto b = hidden.flat();
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("pearson: sizes");
    const std::size_t n = x.size();
    if (n < 2) throw DegenerateInput("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("spearman: sizes");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

// One-sided Wilcoxon signed-rank test of a > b. Zero differences are dropped;
// p is exact for n <= 62 (distribution enumerated over doubled ranks, which
// are integers even under ties), normal approximation beyond.
inline double wilcoxon_one_sided(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("wilcoxon: sizes");
    std::vector<double> diff;
    diff.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        if (d != 0.0) diff.push_back(d);
    }
    const std::size_t n = diff.size();
    if (n == 0) throw AllZeroDifferences("wilcoxon: all differences zero");

    std::vector<double> abs_diff(n);
    for (std::size_t i = 0; i < n; ++i) abs_diff[i] = std::abs(diff[i]);
    std::vector<double> ranks = average_ranks(abs_diff);

    // Doubled ranks are exact integers: average ranks are multiples of 1/2.
    std::vector<std::uint64_t> r2(n);
    std::uint64_t total2 = 0;
    double w_plus2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r2[i] = static_cast<std::uint64_t>(std::llround(2.0 * ranks[i]));
        total2 += r2[i];
        if (diff[i] > 0.0) w_plus2 += 2.0 * ranks[i];
    }
    std::uint64_t w_obs = static_cast<std::uint64_t>(std::llround(w_plus2));

    if (n <= 62) {
        // counts[s]: number of sign patterns with doubled positive-rank sum s.
        std::vector<std::uint64_t> counts(total2 + 1, 0);
        counts[0] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = counts.size(); s-- > r2[i];)
                counts[s] += counts[s - r2[i]];
        }
        std::uint64_t at_least = 0;
        for (std::size_t s = w_obs; s < counts.size(); ++s) at_least += counts[s];
        return static_cast<double>(at_least) / std::ldexp(1.0, static_cast<int>(n));
    }

    // Normal approximation with tie correction and continuity correction.
    double w = w_plus2 / 2.0;
    double nn = static_cast<double>(n);
    double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    std::size_t pos = 0;
    std::vector<double> sorted = abs_diff;
    std::sort(sorted.begin(), sorted.end());
    while (pos < n) {
        std::size_t end = pos + 1;
        while (end < n && sorted[end] == sorted[pos]) ++end;
        double t = static_cast<double>(end - pos);
        var -= t * (t * t - 1.0) / 48.0;
        pos = end;
    }
    double z = (w - mean - 0.5) / std::sqrt(var);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace labelfuse
