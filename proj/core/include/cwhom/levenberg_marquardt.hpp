#pragma once

// Bounded Levenberg-Marquardt for weighted least squares with central
// difference Jacobians.

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cwhom::lm {

struct Problem {
    std::vector<std::string> names;
    std::vector<double> lower;
    std::vector<double> upper;
    /// Characteristic magnitude per parameter; sets difference steps.
    std::vector<double> scale;
    std::size_t residual_count = 0;
    /// Writes weighted residuals (data - model) / sigma.
    std::function<void(std::span<const double>, std::span<double>)> residuals;
};

struct Options {
    double relative_step_tolerance = 1e-8;
    int max_iterations = 200;
};

struct Result {
    std::vector<double> parameters;
    std::vector<double> sigma;  ///< sqrt(diag((J^T J)^-1))
    double chi2 = 0.0;
    int iterations = 0;
};

/// Throws RankDeficientError when J^T J is singular at the start or at the
/// solution, ConvergenceError after max_iterations.
Result solve(const Problem& problem, std::vector<double> start, const Options& options = {});

}  // namespace cwhom::lm
