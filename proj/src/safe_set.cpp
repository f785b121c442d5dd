#include "escada/safe_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "escada/errors.hpp"

namespace escada {

SafeSet SafeSet::singleton(double dose) { return from_intervals({{dose, dose}}); }

SafeSet SafeSet::from_intervals(std::vector<Interval> intervals, double merge_gap) {
    for (const auto& iv : intervals) {
        if (!(iv.lo <= iv.hi)) throw Error(ErrorKind::InvalidArgument, "interval with lo > hi");
    }
    std::sort(intervals.begin(), intervals.end(), [](const Interval& a, const Interval& b) {
        return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
    SafeSet out;
    const double gap = std::max(merge_gap, 0.0);
    for (const auto& iv : intervals) {
        if (!out.intervals_.empty() && (iv.lo <= out.intervals_.back().hi || iv.lo - out.intervals_.back().hi < gap)) {
            out.intervals_.back().hi = std::max(out.intervals_.back().hi, iv.hi);
        } else {
            out.intervals_.push_back(iv);
        }
    }
    return out;
}

bool SafeSet::contains(double dose, double tol) const {
    return std::any_of(intervals_.begin(), intervals_.end(),
                       [&](const Interval& iv) { return dose >= iv.lo - tol && dose <= iv.hi + tol; });
}

double SafeSet::measure() const {
    double total = 0.0;
    for (const auto& iv : intervals_) total += iv.length();
    return total;
}

bool SafeSet::subset_of(const SafeSet& other, double tol) const {
    // Each of our intervals must be covered by the other's intervals grown by tol.
    const SafeSet grown = [&] {
        std::vector<Interval> g;
        for (const auto& iv : other.intervals_) g.push_back({iv.lo - tol, iv.hi + tol});
        return from_intervals(std::move(g));
    }();
    for (const auto& iv : intervals_) {
        const bool covered = std::any_of(grown.intervals_.begin(), grown.intervals_.end(), [&](const Interval& g) {
            return iv.lo >= g.lo && iv.hi <= g.hi;
        });
        if (!covered) return false;
    }
    return true;
}

std::vector<Eigen::Index> SafeSet::grid_members(const EvalGrid& eval) const {
    std::vector<Eigen::Index> out;
    const double tol = 1e-12 * std::max(1.0, eval.doses.empty() ? 1.0 : eval.doses.back());
    for (const auto& iv : intervals_) {
        auto it = std::lower_bound(eval.doses.begin(), eval.doses.end(), iv.lo - tol);
        for (; it != eval.doses.end() && *it <= iv.hi + tol; ++it) {
            out.push_back(static_cast<Eigen::Index>(it - eval.doses.begin()));
        }
    }
    return out;
}

double certified_radius(double slack, double lipschitz, const DoseMetric& metric) {
    if (slack < 0.0) return -1.0;
    if (lipschitz <= 0.0) return std::numeric_limits<double>::infinity();
    const double rho = slack / lipschitz;
    if (rho >= metric.supremum()) return std::numeric_limits<double>::infinity();
    try {
        return metric.inverse(rho);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Saturation) return std::numeric_limits<double>::infinity();
        throw;
    }
}

namespace {

Interval clipped(double centre, double radius, double max_dose) {
    return {std::max(0.0, centre - radius), std::min(max_dose, centre + radius)};
}

}  // namespace

SafeSet expand_safe_set(const SafeSet& prev, const BoundsTable& bounds, const EvalGrid& eval,
                        const SafetyParams& params) {
    if (prev.empty()) throw Error(ErrorKind::DegenerateSet, "safe-set expansion needs a nonempty previous set");
    std::vector<Interval> pieces = prev.intervals();
    for (Eigen::Index j : prev.grid_members(eval)) {
        const double slack =
            std::min(bounds.lower_tight(j) - params.t_min, params.t_max - bounds.upper_tight(j));
        const double r = certified_radius(slack, params.lipschitz, params.metric);
        if (r > 0.0) pieces.push_back(clipped(eval.doses[static_cast<std::size_t>(j)], r, params.max_dose));
    }
    return SafeSet::from_intervals(std::move(pieces), eval.cell);
}

ReachabilityClosure reachability_closure(const std::function<double(double)>& truth, const SafeSet& initial,
                                         double epsilon, const SafetyParams& params, const EvalGrid& eval) {
    ReachabilityClosure out;
    out.epsilon = epsilon;
    const auto m = static_cast<std::size_t>(eval.size());

    const auto radius_at = [&](double d) {
        const double f = truth(d);
        return certified_radius(std::min(f - epsilon - params.t_min, params.t_max - epsilon - f), params.lipschitz,
                                params.metric);
    };

    // Sources on every pass: the endpoints of each interval of the current set
    // plus the grid points inside it. Endpoints keep the iteration moving when a
    // certified interval is narrower than one grid cell; near a boundary where the
    // slack vanishes they converge geometrically, so the loop stops once no
    // endpoint moves by more than a small fraction of a cell.
    std::vector<double> radius(m);
    for (std::size_t j = 0; j < m; ++j) radius[j] = radius_at(eval.doses[j]);

    const double settle = 1e-9 * std::max(eval.cell, 1e-12);
    constexpr int kMaxIterations = 100000;
    SafeSet current = initial;
    std::vector<bool> mask(m, false);
    for (;;) {
        std::vector<Interval> grown = initial.intervals();
        for (const auto& iv : current.intervals()) {
            grown.push_back(iv);
            for (double d : {iv.lo, iv.hi}) {
                const double r = radius_at(d);
                if (r >= 0.0) grown.push_back(clipped(d, r, params.max_dose));
            }
        }
        mask.assign(m, false);
        for (Eigen::Index j : current.grid_members(eval)) {
            const auto u = static_cast<std::size_t>(j);
            mask[u] = true;
            if (radius[u] >= 0.0) grown.push_back(clipped(eval.doses[u], radius[u], params.max_dose));
        }
        SafeSet updated = SafeSet::from_intervals(std::move(grown));
        bool settled = updated.intervals().size() == current.intervals().size();
        for (std::size_t k = 0; settled && k < updated.intervals().size(); ++k) {
            settled = std::abs(updated.intervals()[k].lo - current.intervals()[k].lo) <= settle &&
                      std::abs(updated.intervals()[k].hi - current.intervals()[k].hi) <= settle;
        }
        current = std::move(updated);
        if (settled || out.iterations >= kMaxIterations) break;
        ++out.iterations;
    }
    for (Eigen::Index j : current.grid_members(eval)) mask[static_cast<std::size_t>(j)] = true;
    out.closure = std::move(current);
    out.grid_mask = std::move(mask);
    return out;
}

SafePathReport safe_path(const std::function<double(double)>& truth, double d1, double d2, double t_min,
                         double t_max, double epsilon, int resolution) {
    if (resolution < 2) throw Error(ErrorKind::InvalidArgument, "safe-path resolution must be at least 2");
    if (d1 > d2) std::swap(d1, d2);
    SafePathReport report;
    report.d1 = d1;
    report.d2 = d2;
    double eta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < resolution; ++i) {
        const double d = d1 + (d2 - d1) * static_cast<double>(i) / (resolution - 1);
        const double f = truth(d);
        eta = std::min(eta, std::min(t_max - epsilon - f, f - t_min - epsilon));
    }
    report.margin = eta;
    report.exists = eta > 0.0;
    return report;
}

}  // namespace escada
