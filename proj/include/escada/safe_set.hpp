#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "escada/bounds.hpp"
#include "escada/kernel.hpp"

namespace escada {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double length() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Union of disjoint, sorted, closed dose intervals. Intervals separated by a
/// gap smaller than `merge_gap` are joined when the set is built.
class SafeSet {
public:
    SafeSet() = default;

    static SafeSet singleton(double dose);
    static SafeSet from_intervals(std::vector<Interval> intervals, double merge_gap = 0.0);

    [[nodiscard]] const std::vector<Interval>& intervals() const { return intervals_; }
    [[nodiscard]] bool empty() const { return intervals_.empty(); }
    [[nodiscard]] bool contains(double dose, double tol = 1e-12) const;
    [[nodiscard]] double measure() const;
    [[nodiscard]] double lowest() const { return intervals_.front().lo; }
    [[nodiscard]] double highest() const { return intervals_.back().hi; }

    /// True when every point of this set lies within `tol` of `other`.
    [[nodiscard]] bool subset_of(const SafeSet& other, double tol) const;

    /// Eval-grid indices inside the set, ascending.
    [[nodiscard]] std::vector<Eigen::Index> grid_members(const EvalGrid& eval) const;

    friend bool operator==(const SafeSet&, const SafeSet&) = default;

private:
    std::vector<Interval> intervals_;
};

/// Safety band and the Lipschitz bookkeeping shared by expansion and the oracles.
struct SafetyParams {
    double lipschitz = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    double max_dose = 0.0;
    DoseMetric metric = DoseMetric::absolute();
};

/// Radius in dose units within which every d' satisfies L q(d, d') <= slack.
/// Infinite when slack / L saturates the metric (or L = 0); negative slack
/// yields -1 (no certified neighbourhood).
double certified_radius(double slack, double lipschitz, const DoseMetric& metric);

/// One application of the expansion rule
///   S_n = S_{n-1}  u  { d' : l_bar(d) - L q(d,d') >= T_min  and  u_bar(d) + L q(d,d') <= T_max,
///                         d in S_{n-1} }
/// evaluated at the eval-grid points of S_{n-1}. The union over d' is closed
/// form: an interval of radius K^{-1}(slack(d) / L) around each d, clipped to
/// [0, max_dose]. Gaps narrower than one eval cell are merged.
SafeSet expand_safe_set(const SafeSet& prev, const BoundsTable& bounds, const EvalGrid& eval,
                        const SafetyParams& params);

/// Fixpoint of the epsilon-reachability operator evaluated with the true
/// response. Certified intervals are grown from grid members and from the
/// interval endpoints until no endpoint moves by more than 1e-9 of a grid
/// cell. `grid_mask` marks the eval points inside the closure.
struct ReachabilityClosure {
    SafeSet closure;
    std::vector<bool> grid_mask;
    int iterations = 0;
    double epsilon = 0.0;
};

ReachabilityClosure reachability_closure(const std::function<double(double)>& truth, const SafeSet& initial,
                                         double epsilon, const SafetyParams& params, const EvalGrid& eval);

struct SafePathReport {
    double d1 = 0.0;
    double d2 = 0.0;
    double margin = 0.0;  // eta(d1, d2)
    bool exists = false;  // margin > 0
};

/// eta(d1, d2) = min over d in [d1, d2] of min(T_max - eps - f(d), f(d) - T_min - eps),
/// minimized on `resolution` equally spaced points. Endpoints are swapped if d1 > d2.
SafePathReport safe_path(const std::function<double(double)>& truth, double d1, double d2, double t_min,
                         double t_max, double epsilon, int resolution = 10000);

}  // namespace escada
