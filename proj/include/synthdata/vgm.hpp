#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synthdata {

struct VgmComponent {
    double weight = 0.0;  // posterior expectation of the mixing proportion
    double mean = 0.0;
    double std = 0.0;
};

struct VgmOptions {
    int max_modes = 10;
    double weight_threshold = 0.005;
    double dirichlet_prior = 1e-3;   // per-component concentration
    int max_iterations = 200;
    double rel_tolerance = 1e-6;     // relative objective change
    double std_floor = 1e-6;         // constant-column fallback
};

// Mode model for one continuous column: full fitted mixture plus the active
// set (weight >= threshold) used for encoding.
struct VgmColumnModel {
    std::string column;
    std::vector<VgmComponent> components;
    std::vector<int> active;              // indices into components
    std::vector<double> objective_trace;  // variational objective per iteration
    int iterations = 0;
    bool converged = false;

    size_t active_count() const { return active.size(); }
    const VgmComponent& active_component(size_t a) const { return components.at(static_cast<size_t>(active.at(a))); }

    // Posterior responsibilities of the active components at `value`,
    // normalized over the active set. Sums to 1.
    std::vector<double> responsibilities(double value) const;
};

// Variational EM with a Dirichlet weight prior and Normal-Gamma priors on the
// component parameters. Deterministic for a fixed seed. Components are pruned
// by the weight threshold only; the fitted mixture always keeps max_modes
// entries in `components`.
VgmColumnModel fit_vgm(const std::vector<double>& values, int max_modes, double weight_threshold,
                       uint64_t seed, const VgmOptions& options = {});

inline VgmColumnModel fit_vgm(const std::vector<double>& values, uint64_t seed,
                              const VgmOptions& options = {}) {
    return fit_vgm(values, options.max_modes, options.weight_threshold, seed, options);
}

}  // namespace synthdata
