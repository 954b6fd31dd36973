#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse {

namespace detail {

inline void count_classes(std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
    pos = neg = 0;
    for (int y : labels) (y == 1 ? pos : neg)++;
}

inline void require_both_classes(std::span<const double> scores, std::span<const int> labels, const char* who) {
    if (scores.size() != labels.size()) throw Error(std::string(who) + ": scores and labels differ in length");
    std::size_t pos, neg;
    count_classes(labels, pos, neg);
    if (pos == 0 || neg == 0) throw SingleClassError(std::string(who) + ": both classes are required");
}

inline std::vector<std::size_t> order_by_score(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    return idx;
}

// Midranks (1-based, ties averaged) of values.
inline std::vector<double> midranks(const std::vector<double>& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> r(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k) r[idx[k]] = mid;
        i = j;
    }
    return r;
}

}  // namespace detail

// Twice the Mann-Whitney U: 2 * #(pos > neg) + #(pos == neg), kept integral so
// the AUC is reproducible bit for bit.
inline std::uint64_t mann_whitney_twice_u(std::span<const double> scores, std::span<const int> labels) {
    const auto idx = detail::order_by_score(scores);
    std::uint64_t twice_u = 0, neg_below = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        std::uint64_t pos_here = 0, neg_here = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? pos_here : neg_here)++;
            ++j;
        }
        twice_u += 2 * pos_here * neg_below + pos_here * neg_here;
        neg_below += neg_here;
        i = j;
    }
    return twice_u;
}

inline double auc(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "auc");
    std::size_t pos, neg;
    detail::count_classes(labels, pos, neg);
    return static_cast<double>(mann_whitney_twice_u(scores, labels)) / (2.0 * static_cast<double>(pos) * neg);
}

struct AucInterval {
    double auc = 0.5;
    double low = 0.0;
    double high = 1.0;
    double variance = 0.0;
    bool degenerate = false;  // zero variance: point interval
};

// DeLong structural components via midranks; CI = auc +- 1.96 sd, clamped to [0,1].
inline AucInterval auc_ci_delong(std::span<const double> scores, std::span<const int> labels, double z = 1.959963984540054) {
    detail::require_both_classes(scores, labels, "auc_ci_delong");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    if (pos.size() < 2 || neg.size() < 2) throw Error("auc_ci_delong: at least two cases per class are required");
    const double m = static_cast<double>(pos.size()), n = static_cast<double>(neg.size());

    std::vector<double> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    const auto tz = detail::midranks(all);
    const auto tx = detail::midranks(pos);
    const auto ty = detail::midranks(neg);

    std::vector<double> v10(pos.size()), v01(neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) v10[i] = (tz[i] - tx[i]) / n;
    for (std::size_t j = 0; j < neg.size(); ++j) v01[j] = 1.0 - (tz[pos.size() + j] - ty[j]) / m;

    auto sample_var = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s = 0;
        for (double x : v) s += (x - mean) * (x - mean);
        return s / static_cast<double>(v.size() - 1);
    };

    AucInterval ci;
    ci.auc = auc(scores, labels);
    ci.variance = sample_var(v10) / m + sample_var(v01) / n;
    if (!(ci.variance > 0.0)) {
        ci.variance = 0.0;
        ci.low = ci.high = ci.auc;
        ci.degenerate = true;
        return ci;
    }
    const double half = z * std::sqrt(ci.variance);
    ci.low = std::max(0.0, ci.auc - half);
    ci.high = std::min(1.0, ci.auc + half);
    return ci;
}

// Percentile bootstrap over cases; resamples lacking a class are redrawn.
inline AucInterval auc_ci_bootstrap(std::span<const double> scores, std::span<const int> labels, std::uint64_t seed,
                                    int resamples = 2000, int jobs = 1) {
    detail::require_both_classes(scores, labels, "auc_ci_bootstrap");
    const std::size_t n = scores.size();
    std::vector<double> aucs(static_cast<std::size_t>(resamples));
    parallel_for(aucs.size(), jobs, [&](std::size_t r) {
        std::mt19937_64 rng(derive_seed(seed, "auc-bootstrap", r));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (;;) {
            std::size_t pos = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = pick(rng);
                s[i] = scores[k];
                y[i] = labels[k];
                pos += y[i] == 1;
            }
            if (pos > 0 && pos < n) break;
        }
        aucs[r] = auc(s, y);
    });
    std::sort(aucs.begin(), aucs.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(aucs.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, aucs.size() - 1);
        return aucs[lo] + (aucs[hi] - aucs[lo]) * (pos - static_cast<double>(lo));
    };
    AucInterval ci;
    ci.auc = auc(scores, labels);
    ci.low = std::min(ci.auc, quantile(0.025));
    ci.high = std::max(ci.auc, quantile(0.975));
    ci.degenerate = ci.low == ci.high;
    return ci;
}

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
    double threshold = 0;  // predicted positive iff score >= threshold
};

// Staircase through every distinct score, highest first, after a +inf sentinel.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "roc_curve");
    std::size_t P, N;
    detail::count_classes(labels, P, N);
    auto idx = detail::order_by_score(scores);
    std::reverse(idx.begin(), idx.end());
    std::vector<RocPoint> pts{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double t = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == t) {
            (labels[idx[i]] == 1 ? tp : fp)++;
            ++i;
        }
        pts.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, t});
    }
    return pts;
}

inline double trapezoid_area(const std::vector<RocPoint>& pts) {
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
    return area;
}

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return fp + tn; }
    std::size_t total() const { return tp + fp + fn + tn; }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

inline ConfusionMatrix confusion_at_threshold(std::span<const double> scores, std::span<const int> labels, double t) {
    if (scores.size() != labels.size()) throw Error("confusion_at_threshold: scores and labels differ in length");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= t;
        if (labels[i] == 1) (predicted ? cm.tp : cm.fn)++;
        else (predicted ? cm.fp : cm.tn)++;
    }
    return cm;
}

// A metric with a zero denominator is reported as undefined instead of NaN.
struct Metric {
    double value = 0.0;
    bool defined = false;
};

struct SummaryMetrics {
    Metric tpr, tnr, accuracy, f1, ber;
};

inline SummaryMetrics summary_metrics(const ConfusionMatrix& cm) {
    auto ratio = [](double num, double den) { return den > 0 ? Metric{num / den, true} : Metric{}; };
    SummaryMetrics m;
    m.tpr = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.positives()));
    m.tnr = ratio(static_cast<double>(cm.tn), static_cast<double>(cm.negatives()));
    m.accuracy = ratio(static_cast<double>(cm.tp + cm.tn), static_cast<double>(cm.total()));
    m.f1 = ratio(2.0 * static_cast<double>(cm.tp), static_cast<double>(2 * cm.tp + cm.fp + cm.fn));
    if (m.tpr.defined && m.tnr.defined) m.ber = {1.0 - (m.tpr.value + m.tnr.value) / 2.0, true};
    return m;
}

// Youden's J over the distinct training scores; ties keep the larger threshold.
inline double choose_threshold(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "choose_threshold");
    std::size_t P, N;
    detail::count_classes(labels, P, N);
    auto idx = detail::order_by_score(scores);
    std::reverse(idx.begin(), idx.end());
    // J = tp/P - fp/N; compared as the integer tp*N - fp*P
    long double best_j = -std::numeric_limits<long double>::infinity();
    double best_t = scores[idx.front()];
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double t = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == t) {
            (labels[idx[i]] == 1 ? tp : fp)++;
            ++i;
        }
        const long double j = static_cast<long double>(tp) * N - static_cast<long double>(fp) * P;
        if (j > best_j) {
            best_j = j;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace radfuse
