#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

#include "radfuse/learners/common.hpp"

namespace radfuse::learners {

struct ForestParams {
    int trees = 200;
    int max_depth = 12;
    int min_leaf = 5;
    int mtry = 0;  // 0: floor(sqrt(p))
};

// CART classification tree on Gini impurity, stored as flat node arrays.
// feature < 0 marks a leaf whose value is the positive fraction.
struct DecisionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left, right;
    std::vector<double> value;

    double predict(const RowRef& q) const {
        int node = 0;
        while (feature[node] >= 0) node = q(feature[node]) <= threshold[node] ? left[node] : right[node];
        return value[node];
    }

    // Grows a tree on `rows` (bootstrap indices may repeat).
    static DecisionTree grow(const Matrix& x, std::span<const int> y, std::vector<Eigen::Index> rows,
                             const ForestParams& params, std::mt19937_64& rng) {
        DecisionTree t;
        const int p = static_cast<int>(x.cols());
        const int mtry = std::clamp(params.mtry > 0 ? params.mtry : static_cast<int>(std::floor(std::sqrt(p))), 1, p);
        std::vector<int> features(static_cast<std::size_t>(p));
        std::iota(features.begin(), features.end(), 0);
        std::vector<std::pair<double, int>> sorted;

        struct Task {
            int node;
            std::size_t begin, end;
            int depth;
        };
        auto new_node = [&]() {
            t.feature.push_back(-1);
            t.threshold.push_back(0.0);
            t.left.push_back(-1);
            t.right.push_back(-1);
            t.value.push_back(0.0);
            return static_cast<int>(t.feature.size() - 1);
        };
        std::vector<Task> stack{{new_node(), 0, rows.size(), 0}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const std::size_t n = task.end - task.begin;
            std::size_t pos = 0;
            for (std::size_t i = task.begin; i < task.end; ++i) pos += y[static_cast<std::size_t>(rows[i])] == 1;
            t.value[task.node] = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
            if (task.depth >= params.max_depth || pos == 0 || pos == n || n < 2 * static_cast<std::size_t>(params.min_leaf))
                continue;

            // partial Fisher-Yates draws mtry distinct features
            for (int k = 0; k < mtry; ++k) {
                std::uniform_int_distribution<int> d(k, p - 1);
                std::swap(features[k], features[d(rng)]);
            }
            double best_gini = std::numeric_limits<double>::infinity();
            int best_feature = -1;
            double best_threshold = 0.0;
            const double total_pos = static_cast<double>(pos);
            for (int k = 0; k < mtry; ++k) {
                const int f = features[k];
                sorted.clear();
                for (std::size_t i = task.begin; i < task.end; ++i)
                    sorted.emplace_back(x(rows[i], f), y[static_cast<std::size_t>(rows[i])]);
                std::sort(sorted.begin(), sorted.end());
                double left_pos = 0;
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    left_pos += sorted[i].second;
                    const std::size_t nl = i + 1, nr = n - nl;
                    if (sorted[i].first == sorted[i + 1].first) continue;
                    if (nl < static_cast<std::size_t>(params.min_leaf) || nr < static_cast<std::size_t>(params.min_leaf)) continue;
                    const double pl = left_pos / nl, pr = (total_pos - left_pos) / nr;
                    // weighted Gini: nl*2pl(1-pl) + nr*2pr(1-pr)
                    const double gini = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
                    if (gini < best_gini - 1e-12) {
                        best_gini = gini;
                        best_feature = f;
                        best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                    }
                }
            }
            if (best_feature < 0) continue;

            auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                      rows.begin() + static_cast<std::ptrdiff_t>(task.end),
                                      [&](Eigen::Index r) { return x(r, best_feature) <= best_threshold; });
            const std::size_t split = static_cast<std::size_t>(mid - rows.begin());
            const int l = new_node();
            const int r = new_node();
            t.feature[task.node] = best_feature;
            t.threshold[task.node] = best_threshold;
            t.left[task.node] = l;
            t.right[task.node] = r;
            stack.push_back({r, split, task.end, task.depth + 1});
            stack.push_back({l, task.begin, split, task.depth + 1});
        }
        return t;
    }
};

// Bagged CART forest; probability is the mean leaf positive fraction. Tree t
// draws from a seed derived from (seed, t), so trees can be grown in any order.
struct RandomForest {
    std::vector<DecisionTree> trees;

    static RandomForest train(const Matrix& x, std::span<const int> y, std::uint64_t seed, const ForestParams& params = {},
                              int jobs = 1) {
        require_both_classes(y, "random forest");
        RandomForest f;
        f.trees.resize(static_cast<std::size_t>(params.trees));
        const Eigen::Index n = x.rows();
        parallel_for(f.trees.size(), jobs, [&](std::size_t t) {
            std::mt19937_64 rng(derive_seed(seed, "rf-tree", t));
            std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
            std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
            for (auto& r : rows) r = pick(rng);
            f.trees[t] = DecisionTree::grow(x, y, std::move(rows), params, rng);
        });
        return f;
    }

    double predict_proba(const RowRef& q) const {
        double s = 0;
        for (const auto& t : trees) s += t.predict(q);
        return clamp_probability(trees.empty() ? 0.5 : s / static_cast<double>(trees.size()));
    }

    void save(BundleWriter& w) const {
        w.put_int("rf.trees", static_cast<std::int64_t>(trees.size()));
        for (const auto& t : trees) {
            w.put_ints("rf.feature", t.feature);
            w.put_vector("rf.threshold", t.threshold);
            w.put_ints("rf.left", t.left);
            w.put_ints("rf.right", t.right);
            w.put_vector("rf.value", t.value);
        }
    }
    static RandomForest load(BundleReader& r) {
        RandomForest f;
        const auto count = r.get_int("rf.trees");
        for (std::int64_t i = 0; i < count; ++i) {
            DecisionTree t;
            t.feature = r.get_ints("rf.feature");
            t.threshold = r.get_doubles("rf.threshold");
            t.left = r.get_ints("rf.left");
            t.right = r.get_ints("rf.right");
            t.value = r.get_doubles("rf.value");
            f.trees.push_back(std::move(t));
        }
        return f;
    }
};

}  // namespace radfuse::learners
