#include "stes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stes/csv.hpp"
#include "stes/errors.hpp"

namespace stes {

namespace {

double median_inplace(std::vector<double>& v) {
    const size_t n = v.size();
    auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (n % 2 == 0) {
        auto lo = std::max_element(v.begin(), v.begin() + n / 2);
        m = 0.5 * (m + *lo);
    }
    return m;
}

}  // namespace

std::vector<double> acf_at(const Eigen::VectorXd& series, const std::vector<int>& lags) {
    const int tau = static_cast<int>(series.size());
    int max_lag = 0;
    for (int l : lags) {
        if (l < 1) throw ConfigError("autocorrelation lags must be positive");
        max_lag = std::max(max_lag, l);
    }
    if (tau <= max_lag + 2) {
        throw DataError("series too short (" + std::to_string(tau) + ") for lag " +
                        std::to_string(max_lag));
    }

    double sum = 0.0;
    int n = 0;
    for (int t = 0; t < tau; ++t) {
        if (!std::isnan(series(t))) {
            sum += series(t);
            ++n;
        }
    }
    if (n < 3) throw DataError("too few non-missing points for autocorrelation");
    const double mean = sum / n;
    double var = 0.0;
    for (int t = 0; t < tau; ++t) {
        if (!std::isnan(series(t))) var += (series(t) - mean) * (series(t) - mean);
    }
    var /= n;
    if (!(var > 0.0)) throw DataError("zero variance series in autocorrelation");

    std::vector<double> out;
    out.reserve(lags.size());
    for (int l : lags) {
        double cov = 0.0;
        int pairs = 0;
        for (int t = 0; t + l < tau; ++t) {
            const double a = series(t), b = series(t + l);
            if (std::isnan(a) || std::isnan(b)) continue;
            cov += (a - mean) * (b - mean);
            ++pairs;
        }
        if (pairs == 0) {
            out.push_back(0.0);
            continue;
        }
        out.push_back(std::clamp((cov / pairs) / var, -1.0, 1.0));
    }
    return out;
}

double hampel_outlier_pct(const Eigen::VectorXd& series, int half_window, double threshold) {
    const int tau = static_cast<int>(series.size());
    if (half_window < 1) throw ConfigError("Hampel half window must be >= 1");
    if (tau <= 2 * half_window + 1) {
        throw DataError("series too short for a Hampel window of " +
                        std::to_string(2 * half_window + 1));
    }
    int valid = 0, flagged = 0;
    std::vector<double> window, dev;
    for (int t = 0; t < tau; ++t) {
        if (std::isnan(series(t))) continue;
        ++valid;
        window.clear();
        for (int u = std::max(0, t - half_window); u <= std::min(tau - 1, t + half_window); ++u) {
            if (!std::isnan(series(u))) window.push_back(series(u));
        }
        const double med = median_inplace(window);
        dev.clear();
        for (double v : window) dev.push_back(std::abs(v - med));
        const double mad = median_inplace(dev);
        if (std::abs(series(t) - med) > threshold * 1.4826 * mad) ++flagged;
    }
    if (valid == 0) throw DataError("no usable points for the Hampel filter");
    return 100.0 * flagged / valid;
}

DiagnosticsRow diagnostics_row(const AbnormalPanel& abn, const DiagnosticsOptions& options) {
    const WindowSplit& w = abn.split;
    DiagnosticsRow row;
    row.rho_bar = abn.r_bar;
    row.phi.reserve(options.acf_lags.size());
    for (int l : options.acf_lags) row.phi.emplace_back(l, 0.0);

    int used = 0;
    for (int s : abn.included) {
        const Eigen::VectorXd est = abn.ac.row(s).segment(w.t0, w.tau0()).transpose();
        std::vector<double> vals;
        for (int t = 0; t < est.size(); ++t) {
            if (!std::isnan(est(t))) vals.push_back(est(t));
        }
        const double n = static_cast<double>(vals.size());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= n;
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double v : vals) {
            const double d = v - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;

        row.mu += mean;
        row.sigma += std::sqrt(m2 * n / (n - 1.0));
        row.skewness += m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
        row.kurtosis += m2 > 0 ? m4 / (m2 * m2) : 0.0;

        const std::vector<double> phis = acf_at(est, options.acf_lags);
        for (size_t i = 0; i < phis.size(); ++i) row.phi[i].second += phis[i];
        row.outlier_pct +=
            hampel_outlier_pct(est, options.hampel_half_window, options.hampel_threshold);
        ++used;
    }
    if (used == 0) throw DataError("no stations usable for diagnostics");
    const double inv = 1.0 / used;
    row.mu *= inv;
    row.sigma *= inv;
    row.skewness *= inv;
    row.kurtosis *= inv;
    for (auto& [lag, v] : row.phi) v *= inv;
    row.outlier_pct *= inv;
    return row;
}

std::string diagnostics_table_csv(
    const std::vector<std::pair<std::string, DiagnosticsRow>>& columns) {
    if (columns.empty()) throw ConfigError("diagnostics table needs at least one model");
    std::vector<std::string> header{"statistic"};
    for (const auto& [name, row] : columns) header.push_back(name);
    std::string out = csv_line(header);

    const auto emit = [&](const std::string& name, auto getter) {
        std::vector<std::string> fields{name};
        for (const auto& [model, row] : columns) {
            std::ostringstream v;
            v.precision(6);
            v << getter(row);
            fields.push_back(v.str());
        }
        out += csv_line(fields);
    };
    emit("rho", [](const DiagnosticsRow& r) { return r.rho_bar; });
    emit("mu", [](const DiagnosticsRow& r) { return r.mu; });
    emit("sigma", [](const DiagnosticsRow& r) { return r.sigma; });
    emit("skewness", [](const DiagnosticsRow& r) { return r.skewness; });
    emit("kurtosis", [](const DiagnosticsRow& r) { return r.kurtosis; });
    const size_t n_lags = columns.front().second.phi.size();
    for (size_t i = 0; i < n_lags; ++i) {
        emit("phi_" + std::to_string(columns.front().second.phi[i].first),
             [i](const DiagnosticsRow& r) { return r.phi[i].second; });
    }
    emit("outliers_pct", [](const DiagnosticsRow& r) { return r.outlier_pct; });
    return out;
}

}  // namespace stes
