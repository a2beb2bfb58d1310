#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stes/panel.hpp"

namespace stes {

/// Parameters of the hidden-dynamics geostatistical model
///
///   y_t = X_t beta + w_t + eps_t,      eps_t ~ N(0, sigma2_eps I)
///   w_t = g w_{t-1} + omega_t,         omega_t ~ N(0, nu M(theta))
///
/// where M(theta) is the Matern correlation matrix of the station layout and
/// w_1 starts from the stationary law N(0, nu/(1-g^2) M(theta)).
struct HdgmParams {
    Eigen::VectorXd beta;     ///< fixed effects, intercept first
    double g = 0.0;           ///< temporal AR coefficient, |g| < 1
    double nu = 1.0;          ///< random-effect variance, > 0
    double theta = 1.0;       ///< spatial range in km, > 0
    double sigma2_eps = 1.0;  ///< measurement variance, > 0
    double smoothness = 0.5;  ///< Matern smoothness (1/2, 3/2 or 5/2)

    void validate() const;  ///< throws NumericError on violated bounds
};

/// Matern correlation at distance d (km). Smoothness 1/2 is the exponential
/// kernel exp(-d/theta); 3/2 and 5/2 use their closed forms.
double matern_correlation(double d, double theta, double smoothness);

/// Elementwise Matern correlation matrix of a distance matrix.
Eigen::MatrixXd matern_matrix(const Eigen::MatrixXd& distances, double theta, double smoothness);

/// State-space representation of the model on a given panel.
struct StateSpaceRep {
    double transition_g = 0.0;
    Eigen::MatrixXd state_noise_cov;    ///< Gamma = nu M(theta)
    Eigen::MatrixXd initial_state_cov;  ///< nu/(1-g^2) M(theta)
    double obs_noise_var = 1.0;         ///< sigma2_eps
};

StateSpaceRep make_state_space(const Panel& panel, const HdgmParams& params);

/// Exact Gaussian log-likelihood of the non-missing estimation-window
/// observations under `params`, via the Kalman filter (missing entries are
/// handled by deleting observation rows at that time point).
double kalman_loglik(const Panel& panel, const WindowSplit& split, const HdgmParams& params);

/// Fixed-interval smoother output over the estimation window.
struct KalmanSmoothResult {
    Eigen::MatrixXd states;     ///< N x tau0 smoothed means E[w_t | all window data]
    Eigen::MatrixXd variances;  ///< N x tau0 smoothed marginal variances
    /// Cov(w_t, w_{t-1} | data) for t = 2..tau0 (index 0 holds the t=2 term).
    std::vector<Eigen::MatrixXd> lag_one_cov;
    Eigen::VectorXd filtered_terminal_state;  ///< E[w_T1 | data], the forecast seed
    double loglik = 0.0;
};

KalmanSmoothResult kalman_smooth(const Panel& panel, const WindowSplit& split,
                                 const HdgmParams& params);

struct HdgmFitOptions {
    double tol = 1e-6;  ///< relative log-likelihood change for convergence
    int max_iter = 400;
};

struct HdgmFitResult {
    HdgmParams params;
    std::vector<double> loglik_trace;  ///< one entry per EM iteration, non-decreasing
    Eigen::MatrixXd smoothed_states;
    Eigen::MatrixXd smoothed_variances;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;

    double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

/// Cheap, scale-aware starting point: beta from pooled OLS, the OLS residual
/// variance split evenly between nu and sigma2_eps, g = 0.5, theta = median
/// pairwise distance.
HdgmParams hdgm_default_init(const Panel& panel, const WindowSplit& split,
                             double smoothness = 0.5);

/// Maximum likelihood via EM on the estimation window. beta, sigma2_eps, nu
/// and g are updated from smoothed moments; theta by a bounded 1-D search on
/// log theta with nu profiled out. The likelihood trace is checked to be
/// non-decreasing (within 1e-8) every iteration.
HdgmFitResult em_fit(const Panel& panel, const WindowSplit& split, const HdgmParams& init,
                     const HdgmFitOptions& options = {});

/// Out-of-sample normal values over the event window:
///   NC_{s,T1+h} = x_{s,T1+h}' beta + g^h * filtered_state_{s,T1}.
/// Event-window observations are never read. Returns an N x tau1 matrix
/// (empty when tau1 = 0).
Eigen::MatrixXd forecast_normal(const Panel& panel, const WindowSplit& split,
                                const HdgmParams& params);

/// In-sample normal values over the estimation window, X beta + smoothed
/// state, as an N x tau0 matrix.
Eigen::MatrixXd hdgm_insample_normal(const Panel& panel, const WindowSplit& split,
                                     const HdgmParams& params);

/// JSON round-trip for fitted parameters:
/// {beta: [...], g, nu, theta, sigma2_eps, smoothness, loglik, iterations, converged}.
std::string hdgm_fit_to_json(const HdgmFitResult& fit);
HdgmFitResult hdgm_fit_from_json(const std::string& json_text);

}  // namespace stes
