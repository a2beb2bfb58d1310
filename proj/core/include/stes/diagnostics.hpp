#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stes/eventstudy.hpp"

namespace stes {

/// One diagnostics column: cross-station averages of per-station descriptive
/// statistics of estimation-window abnormal values.
struct DiagnosticsRow {
    double rho_bar = 0.0;   ///< mean pairwise Pearson correlation
    double mu = 0.0;        ///< mean
    double sigma = 0.0;     ///< standard deviation
    double skewness = 0.0;  ///< moment skewness
    double kurtosis = 0.0;  ///< moment kurtosis (not excess-adjusted)
    std::vector<std::pair<int, double>> phi;  ///< autocorrelation per lag
    double outlier_pct = 0.0;                 ///< Hampel share, percent
};

struct DiagnosticsOptions {
    std::vector<int> acf_lags = {1, 3, 7, 14, 21};
    int hampel_half_window = 10;
    double hampel_threshold = 3.0;
};

/// Sample autocorrelations at the given lags, pairwise-complete over missing
/// points, clamped to [-1, 1]. Throws DataError on zero variance or when the
/// series is shorter than max lag + 3.
std::vector<double> acf_at(const Eigen::VectorXd& series, const std::vector<int>& lags);

/// Share of points flagged by a centered rolling Hampel filter:
/// |x - median| > threshold * 1.4826 * MAD over a window of 2*half_window+1
/// points (truncated at the edges). Returns a percentage of the non-missing
/// points. Constant windows (zero MAD) flag only exact deviants from the
/// median, so an all-constant series reports 0.
double hampel_outlier_pct(const Eigen::VectorXd& series, int half_window, double threshold);

/// Diagnostics of one abnormal panel over its estimation window.
DiagnosticsRow diagnostics_row(const AbnormalPanel& abn, const DiagnosticsOptions& options = {});

/// Models-as-columns CSV table.
std::string diagnostics_table_csv(
    const std::vector<std::pair<std::string, DiagnosticsRow>>& columns);

}  // namespace stes
