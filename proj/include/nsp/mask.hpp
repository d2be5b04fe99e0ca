#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "nsp/domain.hpp"

namespace nsp {

// One held-out box, optionally restricted to a single mark group (a neuron
// or an author); group-free regions mask every mark.
struct MaskRegion {
    Vec lower, upper;
    std::optional<int> group;

    double box_measure() const {
        double m = 1.0;
        for (Eigen::Index d = 0; d < lower.size(); ++d) m *= upper[d] - lower[d];
        return m;
    }

    bool contains_location(const Vec& x) const {
        if (x.size() != lower.size()) return false;
        for (Eigen::Index d = 0; d < x.size(); ++d)
            if (x[d] < lower[d] || x[d] > upper[d]) return false;
        return true;
    }
};

// Speckled holdout: scattered sub-boxes of the domain, possibly per group.
struct SpeckledMask {
    std::vector<MaskRegion> regions;

    bool empty() const { return regions.empty(); }

    void validate(const Domain& domain) const {
        for (const auto& r : regions) {
            if (r.lower.size() != domain.dim() || r.upper.size() != domain.dim())
                throw std::invalid_argument("mask region dimension mismatch");
            for (Eigen::Index d = 0; d < r.lower.size(); ++d) {
                if (!(r.upper[d] > r.lower[d]))
                    throw std::invalid_argument("mask region has empty extent");
                if (r.lower[d] < domain.lower()[d] - 1e-12 || r.upper[d] > domain.upper()[d] + 1e-12)
                    throw std::invalid_argument("mask region outside the domain");
            }
        }
    }

    // Is (x, group) held out? group = -1 for models without mark groups.
    bool contains(const Vec& x, int group) const {
        for (const auto& r : regions) {
            if (r.group && *r.group != group) continue;
            if (r.contains_location(x)) return true;
        }
        return false;
    }

    // Lebesgue measure of the group-free masked set.
    double plain_masked_measure() const {
        double total = 0.0;
        for (const auto& r : regions)
            if (!r.group) total += r.box_measure();
        return total;
    }

    // Reduction of the integrated background intensity per unit rate:
    // sum of |box| for group-free regions plus |box| p0(group) for grouped
    // ones, with p0 taken from the model's current background mark law.
    template <class Model>
    double background_measure_deficit(const Model& model) const {
        double total = 0.0;
        for (const auto& r : regions)
            total += r.group ? r.box_measure() * model.background_group_prob(*r.group)
                             : r.box_measure();
        return total;
    }
};

}  // namespace nsp
