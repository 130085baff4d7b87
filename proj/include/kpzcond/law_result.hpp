#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kpzcond {

/// A probability or density ratio together with its error estimate.
struct LawResult {
    double value = 0.0;
    /// quadrature self-consistency estimate or Monte Carlo standard error
    double est_error = 0.0;
    /// |imaginary part| of the underlying complex quadrature, 0 if not applicable
    double imag_residual = 0.0;
    /// "closed_form", "contour", "monte_carlo", ...
    std::string method;
    /// named numeric provenance: node counts, radii, branch counts, timings
    std::vector<std::pair<std::string, double>> diagnostics;

    double diagnostic(const std::string& key, double fallback = 0.0) const {
        for (const auto& [k, v] : diagnostics)
            if (k == key) return v;
        return fallback;
    }
};

}  // namespace kpzcond
