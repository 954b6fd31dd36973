#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <string>

#include "radfuse/learners/bswims.hpp"
#include "radfuse/learners/common.hpp"
#include "radfuse/learners/forest.hpp"
#include "radfuse/learners/knn.hpp"
#include "radfuse/learners/lasso.hpp"
#include "radfuse/learners/lda.hpp"
#include "radfuse/learners/naive_bayes.hpp"
#include "radfuse/learners/svm.hpp"

namespace radfuse::learners {

inline constexpr int kBundleVersion = 1;
inline constexpr std::array<const char*, 7> kMemberNames = {"knn", "svm", "lasso", "bswims", "lda", "nb", "rf"};

struct LearnerConfig {
    KnnParams knn;
    SvmParams svm;
    LassoParams lasso;
    BswimsParams bswims;
    LdaParams lda;
    NaiveBayesParams nb;
    ForestParams rf;
};

// Seven members trained on one shared scaling of the split; the ensemble
// probability is the unweighted mean of member probabilities.
struct SubEnsemble {
    Scaler scaler;
    std::uint64_t seed = 0;
    int schema_version = 0;
    Knn knn;
    LinearSvm svm;
    Lasso lasso;
    Bswims bswims;
    Lda lda;
    NaiveBayes nb;
    RandomForest rf;

    static SubEnsemble train(const Matrix& raw_x, std::span<const int> y, std::uint64_t seed, const LearnerConfig& cfg = {},
                             int jobs = 1, int schema_version = 0) {
        require_both_classes(y, "sub-ensemble");
        SubEnsemble e;
        e.seed = seed;
        e.schema_version = schema_version;
        e.scaler = Scaler::fit(raw_x);
        const Matrix x = e.scaler.apply_rows(raw_x);
        parallel_for(kMemberNames.size(), jobs, [&](std::size_t m) {
            switch (m) {
                case 0: e.knn = Knn::train(x, y, cfg.knn); break;
                case 1: e.svm = LinearSvm::train(x, y, derive_seed(seed, "svm"), cfg.svm); break;
                case 2: e.lasso = Lasso::train(x, y, derive_seed(seed, "lasso"), cfg.lasso); break;
                case 3: e.bswims = Bswims::train(x, y, derive_seed(seed, "bswims"), cfg.bswims); break;
                case 4: e.lda = Lda::train(x, y, cfg.lda); break;
                case 5: e.nb = NaiveBayes::train(x, y, cfg.nb); break;
                case 6: e.rf = RandomForest::train(x, y, derive_seed(seed, "rf"), cfg.rf, jobs); break;
            }
        });
        return e;
    }

    // Member probabilities for one unscaled feature row, in kMemberNames order.
    std::array<double, 7> member_probas(const RowRef& raw) const {
        const Vector q = scaler.apply(raw);
        return {knn.predict_proba(q),   svm.predict_proba(q), lasso.predict_proba(q), bswims.predict_proba(q),
                lda.predict_proba(q),   nb.predict_proba(q),  rf.predict_proba(q)};
    }

    double predict_proba(const RowRef& raw) const { return soft_vote(member_probas(raw)); }

    // Summed in sorted order so the result does not depend on member order.
    static double soft_vote(std::span<const double> probs) {
        std::vector<double> sorted(probs.begin(), probs.end());
        std::sort(sorted.begin(), sorted.end());
        double s = 0;
        for (double p : sorted) s += p;
        return clamp_probability(s / static_cast<double>(probs.size()));
    }

    void save(std::ostream& out) const {
        BundleWriter w(out);
        w.put_text("radfuse-bundle", std::to_string(kBundleVersion));
        w.put_int("schema_version", schema_version);
        w.put_u64("seed", seed);
        w.put_vector("scaler.mean", scaler.mean);
        w.put_vector("scaler.stdev", scaler.stdev);
        knn.save(w);
        svm.save(w);
        lasso.save(w);
        bswims.save(w);
        lda.save(w);
        nb.save(w);
        rf.save(w);
    }

    static SubEnsemble load(std::istream& in) {
        BundleReader r(in);
        if (r.get_text("radfuse-bundle") != std::to_string(kBundleVersion)) throw Error("bundle: unsupported version");
        SubEnsemble e;
        e.schema_version = static_cast<int>(r.get_int("schema_version"));
        e.seed = r.get_u64("seed");
        e.scaler.mean = r.get_vector("scaler.mean");
        e.scaler.stdev = r.get_vector("scaler.stdev");
        e.knn = Knn::load(r);
        e.svm = LinearSvm::load(r);
        e.lasso = Lasso::load(r);
        e.bswims = Bswims::load(r);
        e.lda = Lda::load(r);
        e.nb = NaiveBayes::load(r);
        e.rf = RandomForest::load(r);
        return e;
    }
};

}  // namespace radfuse::learners
