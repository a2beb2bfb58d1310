#pragma once

// Brute-force joint-Gaussian reference for the spatio-temporal model. The
// stacked vector of observed responses is multivariate normal with
//   E[y_st]            = x_st' beta
//   Cov(y_st, y_s't')  = g^|t-t'| * nu/(1-g^2) * rho(d(s,s')) + 1{same cell} sigma2
// so the log-likelihood, smoothed states and forecasts all follow from dense
// conditioning. Everything here is computed from the process definition,
// independent of the Kalman implementation under test.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "stes/hdgm.hpp"
#include "stes/panel.hpp"

namespace stes::test {

struct DenseOracle {
    const Panel& panel;
    const WindowSplit& split;
    const HdgmParams& params;

    struct Cell {
        int station;
        int t;  // absolute panel time index
    };
    std::vector<Cell> cells;     // observed cells over the estimation window
    Eigen::MatrixXd spatial;     // nu/(1-g^2) * correlation matrix
    Eigen::VectorXd resid;       // y - X beta at the observed cells
    Eigen::MatrixXd cov;         // covariance of the observed cells
    Eigen::LDLT<Eigen::MatrixXd> cov_ldlt;

    DenseOracle(const Panel& p, const WindowSplit& s, const HdgmParams& par)
        : panel(p), split(s), params(par) {
        const int n = panel.n_stations();
        const Eigen::MatrixXd dist = distance_matrix(panel).d;
        spatial.resize(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                spatial(i, j) = params.nu / (1.0 - params.g * params.g) *
                                kernel(dist(i, j), params.theta, params.smoothness);
            }
        }
        for (int t = split.t0; t <= split.t1; ++t) {
            for (int s2 = 0; s2 < n; ++s2) {
                if (!std::isnan(panel.observations()(s2, t))) cells.push_back({s2, t});
            }
        }
        const int m = static_cast<int>(cells.size());
        resid.resize(m);
        cov.resize(m, m);
        for (int i = 0; i < m; ++i) {
            const auto [si, ti] = cells[i];
            resid(i) = panel.observations()(si, ti) - mean_at(si, ti);
            for (int j = 0; j < m; ++j) {
                const auto [sj, tj] = cells[j];
                cov(i, j) = std::pow(params.g, std::abs(ti - tj)) * spatial(si, sj);
                if (i == j) cov(i, j) += params.sigma2_eps;
            }
        }
        cov_ldlt.compute(cov);
    }

    static double kernel(double d, double theta, double smoothness) {
        const double r = d / theta;
        if (smoothness == 0.5) return std::exp(-r);
        if (smoothness == 1.5) return (1.0 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r);
        return (1.0 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
    }

    double mean_at(int station, int t) const {
        double mean = params.beta(0);
        for (int j = 0; j < panel.n_covariates(); ++j) {
            mean += params.beta(j + 1) * panel.covariate(j)(station, t);
        }
        return mean;
    }

    double loglik() const {
        const int m = static_cast<int>(cells.size());
        const Eigen::VectorXd alpha = cov_ldlt.solve(resid);
        double logdet = 0.0;
        for (int i = 0; i < m; ++i) logdet += std::log(cov_ldlt.vectorD()(i));
        return -0.5 * (m * std::log(2.0 * M_PI) + logdet + resid.dot(alpha));
    }

    /// Cov(w_{s,t}, observed cell j) without measurement noise.
    Eigen::VectorXd state_cross(int station, int t) const {
        const int m = static_cast<int>(cells.size());
        Eigen::VectorXd cross(m);
        for (int j = 0; j < m; ++j) {
            const auto [sj, tj] = cells[j];
            cross(j) = std::pow(params.g, std::abs(t - tj)) * spatial(station, sj);
        }
        return cross;
    }

    /// E[w_{s,t} | observed data], for any absolute time index.
    double smoothed_state(int station, int t) const {
        return state_cross(station, t).dot(cov_ldlt.solve(resid));
    }

    /// Var(w_{s,t} | observed data).
    double smoothed_variance(int station, int t) const {
        const Eigen::VectorXd cross = state_cross(station, t);
        return spatial(station, station) - cross.dot(cov_ldlt.solve(cross));
    }

    /// Cov(w_{s,t}, w_{s',t'} | observed data).
    double smoothed_cross_cov(int s1, int t1, int s2, int t2) const {
        const Eigen::VectorXd c1 = state_cross(s1, t1);
        const Eigen::VectorXd c2 = state_cross(s2, t2);
        const double prior = std::pow(params.g, std::abs(t1 - t2)) * spatial(s1, s2);
        return prior - c1.dot(cov_ldlt.solve(c2));
    }

    /// E[x'beta + w | data] over the event window: the normal-value target.
    Eigen::MatrixXd forecast() const {
        Eigen::MatrixXd out(panel.n_stations(), split.tau1());
        for (int h = 1; h <= split.tau1(); ++h) {
            for (int s = 0; s < panel.n_stations(); ++s) {
                out(s, h - 1) = mean_at(s, split.t1 + h) + smoothed_state(s, split.t1 + h);
            }
        }
        return out;
    }
};

}  // namespace stes::test
