#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gsn/image_io.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

struct RocPoint {
    double fa = 0;  // false alarm rate: covers flagged as stego
    double tp = 0;  // true positive rate: stegos flagged as stego
};

/// Detection quality of a cover/stego score split. Pe = 0.5 means the
/// detector does no better than chance, which is the steganographic ideal.
struct DetectionReport {
    double pe = 0.5;
    double auc = 0.5;
    double threshold_at_pe = 0.0;
    std::vector<RocPoint> roc;
    // Filled by evaluation flows that also have images and bits at hand.
    double mae = 0.0;
    double bit_acc = 0.0;
    Index n_cover = 0;
    Index n_stego = 0;
};

namespace detail {

inline double frac_at_least(const std::vector<double>& sorted, double t) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return (double)(sorted.end() - it) / (double)sorted.size();
}

inline double frac_below(const std::vector<double>& sorted, double t) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return (double)(it - sorted.begin()) / (double)sorted.size();
}

inline std::vector<double> sorted_copy(const std::vector<double>& v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    return s;
}

/// Distinct candidate thresholds, descending, with sentinels at both ends.
inline std::vector<double> threshold_sweep(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> t;
    t.reserve(a.size() + b.size() + 2);
    t.push_back(std::numeric_limits<double>::infinity());
    t.insert(t.end(), a.begin(), a.end());
    t.insert(t.end(), b.begin(), b.end());
    t.push_back(-std::numeric_limits<double>::infinity());
    std::sort(t.begin(), t.end(), std::greater<double>());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace detail

/// Minimum average error rate over all decision thresholds. Scores are
/// stego-class probabilities; a sample is called stego when score >= t.
inline DetectionReport pe(const std::vector<double>& scores_cover, const std::vector<double>& scores_stego) {
    GSN_CHECK(!scores_cover.empty() && !scores_stego.empty(), "pe needs nonempty score lists");
    std::vector<double> cs = detail::sorted_copy(scores_cover);
    std::vector<double> ss = detail::sorted_copy(scores_stego);
    DetectionReport r;
    r.n_cover = (Index)cs.size();
    r.n_stego = (Index)ss.size();
    r.pe = 1.0;
    for (double t : detail::threshold_sweep(cs, ss)) {
        double fa = detail::frac_at_least(cs, t);
        double md = detail::frac_below(ss, t);
        double e = 0.5 * (fa + md);
        if (e < r.pe) {
            r.pe = e;
            r.threshold_at_pe = t;
        }
    }
    return r;
}

/// ROC curve from the same sweep (thresholds descending, so FA ascends) and
/// its trapezoid-rule area.
inline DetectionReport roc_auc(const std::vector<double>& scores_cover,
                               const std::vector<double>& scores_stego) {
    GSN_CHECK(!scores_cover.empty() && !scores_stego.empty(), "roc_auc needs nonempty score lists");
    std::vector<double> cs = detail::sorted_copy(scores_cover);
    std::vector<double> ss = detail::sorted_copy(scores_stego);
    DetectionReport r = pe(scores_cover, scores_stego);
    for (double t : detail::threshold_sweep(cs, ss))
        r.roc.push_back({detail::frac_at_least(cs, t), detail::frac_at_least(ss, t)});
    r.auc = 0.0;
    for (std::size_t i = 1; i < r.roc.size(); ++i)
        r.auc += (r.roc[i].fa - r.roc[i - 1].fa) * 0.5 * (r.roc[i].tp + r.roc[i - 1].tp);
    return r;
}

/// Mean absolute pixel difference of paired batches on the 0..255 scale.
inline double mae_pairs(const ImageBatch& covers, const ImageBatch& stegos) {
    GSN_CHECK(covers.pixels.same_shape(stegos.pixels),
              "mae_pairs: shape mismatch " << shape_str(covers.pixels.dims) << " vs "
                                           << shape_str(stegos.pixels.dims));
    GSN_CHECK(covers.pixels.numel() > 0, "mae_pairs of empty batches");
    double acc = (covers.pixels.v.template cast<double>() - stegos.pixels.v.template cast<double>())
                     .abs()
                     .mean();
    return acc * 127.5;  // [-1,1] span maps to 0..255
}

}  // namespace gsn
