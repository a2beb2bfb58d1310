#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stes/panel.hpp"

namespace stes {

/// ARMA error order, both sides capped at 7 (daily-data convention).
struct ArmaOrder {
    int p_ar = 0;
    int q_ma = 0;

    void validate() const;  ///< throws ConfigError outside [0,7]
    bool operator==(const ArmaOrder&) const = default;
};

enum class BaselineKind { lm, regar1, regarma };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

/// A fitted per-station temporal model: regression coefficients plus an ARMA
/// error process. The lm case is the degenerate ARMA(0,0).
struct BaselineFit {
    std::string station_id;
    BaselineKind kind = BaselineKind::lm;
    ArmaOrder order;
    Eigen::VectorXd coefficients;    ///< regression, intercept first
    Eigen::VectorXd ar;              ///< phi_1..phi_p (stationary)
    Eigen::VectorXd ma;              ///< theta_1..theta_q (invertible)
    double sigma2 = 0.0;             ///< innovation variance
    double loglik = 0.0;
    double aicc = 0.0;
    Eigen::VectorXd terminal_state;  ///< ARMA filter state at the end of the window
    bool converged = true;
};

/// Ordinary least squares with iid errors. `series` may contain NaN
/// (missing rows are dropped); the design must be full rank on the kept
/// rows, otherwise a DataError names the collinear columns.
BaselineFit fit_lm(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                   const std::vector<std::string>& column_names = {});

/// Exact maximum likelihood for regression with ARMA(p,q) errors via the
/// Harvey state-space form. Missing responses are handled by the filter.
/// Stationarity and invertibility are enforced through a partial-
/// autocorrelation reparametrization, so accepted fits always have AR and MA
/// roots outside the unit circle.
BaselineFit fit_regarma(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                        ArmaOrder order);

/// Minimizes AICc over the (0,0)..(7,7) grid. Ties break toward smaller
/// p+q, then smaller p. Cells whose optimizer fails are skipped; throws
/// DataError when every cell fails.
ArmaOrder select_order_aicc(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                            int max_p = 7, int max_q = 7);

/// Event-window forecast: regression surface plus the ARMA error forecast
/// propagated from the end of the estimation window (decays to zero).
Eigen::VectorXd forecast_baseline(const BaselineFit& fit, const Eigen::MatrixXd& design_event);

/// One-step-ahead in-sample predictions over the fit window (the regression
/// surface alone for lm). Used for estimation-window normal values.
Eigen::VectorXd baseline_insample_normal(const BaselineFit& fit, const Eigen::VectorXd& series,
                                         const Eigen::MatrixXd& design);

/// Per-station fits for a whole panel plus the stitched N x tau matrix of
/// normal values over estimation + event windows. A station whose entire
/// regARMA grid fails falls back to lm with a warning.
struct PanelBaselineResult {
    std::vector<BaselineFit> fits;
    Eigen::MatrixXd normal_values;  ///< N x tau, NaN outside the two windows
    std::vector<std::string> warnings;
};

PanelBaselineResult fit_baseline_panel(const Panel& panel, const WindowSplit& split,
                                       BaselineKind kind, int threads = 1);

/// CSV summary (station_id, model_kind, p_ar, q_ma, aicc, residual_variance).
std::string baseline_summary_csv(const std::vector<BaselineFit>& fits);

}  // namespace stes
