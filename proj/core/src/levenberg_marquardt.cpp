#include "cwhom/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cwhom/errors.hpp"

namespace cwhom::lm {
namespace {

constexpr double kRankTolerance = 1e-11;
constexpr double kMaxLambda = 1e14;

double clamp_to(const Problem& p, std::size_t j, double v) {
    return std::clamp(v, p.lower[j], p.upper[j]);
}

double sum_squares(const Eigen::VectorXd& r) { return r.squaredNorm(); }

Eigen::VectorXd evaluate(const Problem& p, const std::vector<double>& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(p.residual_count));
    p.residuals(x, std::span<double>(r.data(), p.residual_count));
    return r;
}

// Jacobian of the model (= minus the Jacobian of the residuals).
Eigen::MatrixXd jacobian(const Problem& p, const std::vector<double>& x) {
    const std::size_t n = x.size();
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(p.residual_count), static_cast<Eigen::Index>(n));
    std::vector<double> probe = x;
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(std::abs(x[j]), p.scale[j]);
        double hi = std::min(x[j] + h, p.upper[j]);
        double lo = std::max(x[j] - h, p.lower[j]);
        if (hi == lo) hi = x[j] + h;
        probe[j] = hi;
        const Eigen::VectorXd r_hi = evaluate(p, probe);
        probe[j] = lo;
        const Eigen::VectorXd r_lo = evaluate(p, probe);
        probe[j] = x[j];
        jac.col(static_cast<Eigen::Index>(j)) = -(r_hi - r_lo) / (hi - lo);
    }
    return jac;
}

void check_rank(const Problem& p, const Eigen::MatrixXd& normal) {
    const Eigen::Index n = normal.rows();
    Eigen::VectorXd d(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double diag = normal(j, j);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw RankDeficientError(fmt::format(
                "parameter '{}' has no influence on the model; Jacobian is rank deficient",
                p.names[static_cast<std::size_t>(j)]));
        }
        d(j) = 1.0 / std::sqrt(diag);
    }
    const Eigen::MatrixXd corr = d.asDiagonal() * normal * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    const double min_ev = eig.eigenvalues().minCoeff();
    if (min_ev < kRankTolerance) {
        // Name the parameter that dominates the degenerate direction.
        Eigen::Index worst = 0;
        eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
        throw RankDeficientError(fmt::format(
            "Jacobian is rank deficient (min scaled eigenvalue {:.3g}); '{}' is not identifiable",
            min_ev, p.names[static_cast<std::size_t>(worst)]));
    }
}

}  // namespace

Result solve(const Problem& problem, std::vector<double> x, const Options& options) {
    const std::size_t n = x.size();
    if (problem.lower.size() != n || problem.upper.size() != n || problem.scale.size() != n ||
        problem.names.size() != n) {
        throw ConfigError("least-squares problem dimensions are inconsistent");
    }
    for (std::size_t j = 0; j < n; ++j) x[j] = clamp_to(problem, j, x[j]);

    Eigen::VectorXd r = evaluate(problem, x);
    double chi2 = sum_squares(r);
    Eigen::MatrixXd jac = jacobian(problem, x);
    Eigen::MatrixXd normal = jac.transpose() * jac;
    check_rank(problem, normal);

    double lambda = 1e-3;
    bool converged = false;
    int iteration = 0;
    for (; iteration < options.max_iterations && !converged; ++iteration) {
        const Eigen::VectorXd gradient = jac.transpose() * r;
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal() += lambda * normal.diagonal();
            const Eigen::VectorXd step = damped.ldlt().solve(gradient);
            std::vector<double> trial(n);
            double relative = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                trial[j] = clamp_to(problem, j, x[j] + step(static_cast<Eigen::Index>(j)));
                relative = std::max(relative, std::abs(trial[j] - x[j]) /
                                                  std::max(std::abs(x[j]), problem.scale[j]));
            }
            const Eigen::VectorXd r_trial = evaluate(problem, trial);
            const double chi2_trial = sum_squares(r_trial);
            if (std::isfinite(chi2_trial) && chi2_trial <= chi2) {
                x = std::move(trial);
                r = r_trial;
                chi2 = chi2_trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (relative < options.relative_step_tolerance) converged = true;
            } else {
                lambda *= 10.0;
                // No downhill step exists at any damping: stationary point.
                if (relative < options.relative_step_tolerance || lambda > kMaxLambda) {
                    converged = true;
                    break;
                }
            }
        }
        if (accepted && !converged) {
            jac = jacobian(problem, x);
            normal = jac.transpose() * jac;
        }
    }
    if (!converged) {
        throw ConvergenceError(
            fmt::format("least squares did not converge within {} iterations", options.max_iterations));
    }

    jac = jacobian(problem, x);
    normal = jac.transpose() * jac;
    check_rank(problem, normal);
    const Eigen::MatrixXd covariance = normal.inverse();
    Result result;
    result.parameters = x;
    result.sigma.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        result.sigma[j] = std::sqrt(std::max(0.0, covariance(static_cast<Eigen::Index>(j),
                                                             static_cast<Eigen::Index>(j))));
    }
    result.chi2 = chi2;
    result.iterations = iteration;
    return result;
}

}  // namespace cwhom::lm
