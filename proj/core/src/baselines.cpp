#include "stes/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "stes/csv.hpp"
#include "stes/errors.hpp"

namespace stes {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// ---- stationarity-preserving reparametrization --------------------------

/// Durbin-Levinson: partial autocorrelations (each in (-1,1)) to AR
/// coefficients of a stationary polynomial.
Eigen::VectorXd pacf_to_ar(const Eigen::VectorXd& pacf) {
    const int h = static_cast<int>(pacf.size());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd tmp(h);
    for (int k = 0; k < h; ++k) {
        const double r = pacf(k);
        for (int i = 0; i < k; ++i) tmp(i) = a(i) - r * a(k - 1 - i);
        for (int i = 0; i < k; ++i) a(i) = tmp(i);
        a(k) = r;
    }
    return a;
}

struct ArmaCoefficients {
    Eigen::VectorXd ar;
    Eigen::VectorXd ma;
};

/// Unconstrained optimizer point -> stationary AR, invertible MA.
ArmaCoefficients decode(const Eigen::VectorXd& z, const ArmaOrder& order) {
    ArmaCoefficients c;
    Eigen::VectorXd rp(order.p_ar), rq(order.q_ma);
    for (int i = 0; i < order.p_ar; ++i) rp(i) = std::tanh(z(i));
    for (int i = 0; i < order.q_ma; ++i) rq(i) = std::tanh(z(order.p_ar + i));
    c.ar = pacf_to_ar(rp);
    // theta = -a keeps 1 + sum theta_j z^j equal to the stationary AR
    // polynomial, hence invertible.
    c.ma = -pacf_to_ar(rq);
    return c;
}

// ---- ARMA state space (Harvey form) --------------------------------------

struct ArmaStateSpace {
    Eigen::MatrixXd t;   // m x m transition
    Eigen::VectorXd r;   // m, unit-variance shock loading
    Eigen::MatrixXd p0;  // stationary state covariance at unit shock variance
    int m = 1;
};

ArmaStateSpace make_arma_ss(const Eigen::VectorXd& ar, const Eigen::VectorXd& ma) {
    const int p = static_cast<int>(ar.size());
    const int q = static_cast<int>(ma.size());
    const int m = std::max(p, q + 1);
    ArmaStateSpace ss;
    ss.m = m;
    ss.t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < p; ++i) ss.t(i, 0) = ar(i);
    for (int i = 0; i + 1 < m; ++i) ss.t(i, i + 1) = 1.0;
    ss.r = Eigen::VectorXd::Zero(m);
    ss.r(0) = 1.0;
    for (int i = 0; i < q; ++i) ss.r(i + 1) = ma(i);

    // Stationary covariance: vec(P) = (I - T (x) T)^-1 vec(R R').
    const int mm = m * m;
    Eigen::MatrixXd kron = Eigen::MatrixXd::Identity(mm, mm);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int l = 0; l < m; ++l) kron(i * m + k, j * m + l) -= ss.t(i, j) * ss.t(k, l);
    const Eigen::MatrixXd rr = ss.r * ss.r.transpose();
    const Eigen::VectorXd vec_rr = Eigen::Map<const Eigen::VectorXd>(rr.data(), mm);
    const Eigen::VectorXd vec_p = kron.partialPivLu().solve(vec_rr);
    ss.p0 = Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), m, m);
    ss.p0 = 0.5 * (ss.p0 + ss.p0.transpose());
    return ss;
}

/// One filter sweep at unit shock variance over a data block whose first
/// column is the response and remaining columns the regressors. Produces
/// whitened rows for the observed time points plus the log-determinant term.
struct WhitenResult {
    Eigen::MatrixXd rows;  // n_obs x (1+k)
    double sum_log_f = 0.0;
    bool ok = true;
};

WhitenResult whiten(const ArmaStateSpace& ss, const Eigen::MatrixXd& data,
                    const std::vector<bool>& observed, int n_obs) {
    const int tau = static_cast<int>(data.rows());
    const int width = static_cast<int>(data.cols());
    const int m = ss.m;

    WhitenResult out;
    out.rows.resize(n_obs, width);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, width);
    Eigen::MatrixXd p = ss.p0;
    int row = 0;
    for (int t = 0; t < tau; ++t) {
        if (observed[t]) {
            const double f = p(0, 0);
            if (!(f > 1e-300) || !std::isfinite(f)) {
                out.ok = false;
                return out;
            }
            const Eigen::RowVectorXd v = data.row(t) - a.row(0);
            out.rows.row(row++) = v / std::sqrt(f);
            out.sum_log_f += std::log(f);
            const Eigen::VectorXd gain = p.col(0) / f;
            a.noalias() += gain * v;
            p.noalias() -= gain * p.row(0);
        }
        // Predict. T is companion-structured but m is tiny; dense is fine.
        a = ss.t * a;
        p = ss.t * p * ss.t.transpose() + ss.r * ss.r.transpose();
        p = 0.5 * (p + p.transpose());
    }
    return out;
}

struct ProfileFit {
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    double loglik = -std::numeric_limits<double>::infinity();
    bool ok = false;
};

ProfileFit profile_fit(const ArmaStateSpace& ss, const Eigen::MatrixXd& data,
                       const std::vector<bool>& observed, int n_obs) {
    ProfileFit out;
    const WhitenResult w = whiten(ss, data, observed, n_obs);
    if (!w.ok) return out;
    const int k = static_cast<int>(data.cols()) - 1;
    const Eigen::MatrixXd xw = w.rows.rightCols(k);
    const Eigen::VectorXd yw = w.rows.col(0);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    out.beta = qr.solve(yw);
    const double rss = (yw - xw * out.beta).squaredNorm();
    out.sigma2 = std::max(rss / n_obs, 1e-300);
    out.loglik = -0.5 * (n_obs * (kLog2Pi + std::log(out.sigma2) + 1.0) + w.sum_log_f);
    out.ok = std::isfinite(out.loglik);
    return out;
}

// ---- Nelder-Mead ----------------------------------------------------------

struct NmResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
};

NmResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                     const Eigen::VectorXd& x0, double step, int max_eval, double tol) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int i = 1; i <= n; ++i) xs[i](i - 1) += step;
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : 1e100;
    };
    for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

    NmResult out;
    while (evals < max_eval) {
        std::vector<int> ord(n + 1);
        for (int i = 0; i <= n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = ord[0], worst = ord[n], second = ord[n - 1];
        if (std::abs(fs[worst] - fs[best]) < tol * (1.0 + std::abs(fs[best]))) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += xs[i];
        centroid /= n;

        const Eigen::VectorXd xr = centroid + (centroid - xs[worst]);
        const double fr = eval(xr);
        if (fr < fs[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[worst]);
            const double fe = eval(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            const Eigen::VectorXd xc = centroid + 0.5 * (xs[worst] - centroid);
            const double fc = eval(xc);
            if (fc < fs[worst]) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
                    fs[i] = eval(xs[i]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fs[i] < fs[best]) best = i;
    out.x = xs[best];
    out.f = fs[best];
    return out;
}

// ---- shared fitting helpers ----------------------------------------------

/// Inverse roots of 1 - c1 z - ... - cp z^p via the companion matrix.
Eigen::VectorXcd inverse_roots(const Eigen::VectorXd& coef) {
    const int p = static_cast<int>(coef.size());
    if (p == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) companion(0, i) = coef(i);
    for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    return companion.eigenvalues();
}

/// Near-unit roots and near-cancelling AR/MA root pairs mean the optimum is
/// not identified; such fits are flagged so order selection skips them.
bool roots_identified(const Eigen::VectorXd& ar, const Eigen::VectorXd& ma) {
    const Eigen::VectorXcd ar_roots = inverse_roots(ar);
    const Eigen::VectorXcd ma_roots = inverse_roots(-ma);  // 1 + sum theta z^j
    constexpr double boundary = 0.998;
    for (int i = 0; i < ar_roots.size(); ++i) {
        if (std::abs(ar_roots(i)) > boundary) return false;
    }
    for (int i = 0; i < ma_roots.size(); ++i) {
        if (std::abs(ma_roots(i)) > boundary) return false;
    }
    constexpr double cancel = 0.02;
    for (int i = 0; i < ar_roots.size(); ++i) {
        for (int j = 0; j < ma_roots.size(); ++j) {
            if (std::abs(ar_roots(i) - ma_roots(j)) < cancel) return false;
        }
    }
    return true;
}

void check_dimensions(const Eigen::VectorXd& series, const Eigen::MatrixXd& design) {
    if (series.size() != design.rows()) {
        throw ConfigError("series and design have different lengths");
    }
    if (design.rows() == 0 || design.cols() == 0) {
        throw ConfigError("empty design matrix");
    }
}

double aicc_of(double loglik, int n_params, int n_obs) {
    const double k = n_params;
    const double denom = n_obs - k - 1.0;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / denom;
}

/// Filtered ARMA state at the last window index for the residual series.
Eigen::VectorXd terminal_filter_state(const ArmaStateSpace& ss, const Eigen::VectorXd& resid,
                                      const std::vector<bool>& observed) {
    const int tau = static_cast<int>(resid.size());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ss.m);
    Eigen::MatrixXd p = ss.p0;
    for (int t = 0; t < tau; ++t) {
        if (observed[t]) {
            const double f = p(0, 0);
            if (f > 1e-300) {
                const double v = resid(t) - a(0);
                const Eigen::VectorXd gain = p.col(0) / f;
                a.noalias() += gain * v;
                p.noalias() -= gain * p.row(0);
            }
        }
        if (t + 1 < tau) {
            a = ss.t * a;
            p = ss.t * p * ss.t.transpose() + ss.r * ss.r.transpose();
        }
    }
    return a;
}

}  // namespace

void ArmaOrder::validate() const {
    if (p_ar < 0 || p_ar > 7 || q_ma < 0 || q_ma > 7) {
        throw ConfigError("ARMA order (" + std::to_string(p_ar) + "," + std::to_string(q_ma) +
                          ") outside the supported range (0,0)..(7,7)");
    }
}

std::string to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::lm: return "lm";
        case BaselineKind::regar1: return "regar1";
        case BaselineKind::regarma: return "regarma";
    }
    return "?";
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    if (name == "lm") return BaselineKind::lm;
    if (name == "regar1") return BaselineKind::regar1;
    if (name == "regarma") return BaselineKind::regarma;
    throw ConfigError("unknown baseline model '" + name + "' (expected lm, regar1 or regarma)");
}

BaselineFit fit_lm(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                   const std::vector<std::string>& column_names) {
    check_dimensions(series, design);
    const int k = static_cast<int>(design.cols());
    std::vector<int> keep;
    for (int t = 0; t < series.size(); ++t) {
        if (!std::isnan(series(t))) keep.push_back(t);
    }
    const int n = static_cast<int>(keep.size());
    if (n <= k) {
        throw DataError("too few non-missing observations (" + std::to_string(n) +
                        ") for " + std::to_string(k) + " regression columns");
    }
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x.row(i) = design.row(keep[i]);
        y(i) = series(keep[i]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        const auto perm = qr.colsPermutation().indices();
        std::string cols;
        for (int j = qr.rank(); j < k; ++j) {
            if (!cols.empty()) cols += ", ";
            const int idx = perm(j);
            cols += (idx < static_cast<int>(column_names.size())) ? column_names[idx]
                                                                  : "column " + std::to_string(idx);
        }
        throw DataError("design matrix is rank deficient; collinear: " + cols);
    }

    BaselineFit fit;
    fit.kind = BaselineKind::lm;
    fit.coefficients = qr.solve(y);
    const double rss = (y - x * fit.coefficients).squaredNorm();
    fit.sigma2 = rss / std::max(1, n - k);
    const double ml_sigma2 = std::max(rss / n, 1e-300);
    fit.loglik = -0.5 * n * (kLog2Pi + std::log(ml_sigma2) + 1.0);
    fit.aicc = aicc_of(fit.loglik, k + 1, n);
    fit.terminal_state = Eigen::VectorXd::Zero(1);
    return fit;
}

BaselineFit fit_regarma(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                        ArmaOrder order) {
    order.validate();
    check_dimensions(series, design);
    const int tau = static_cast<int>(series.size());
    const int k = static_cast<int>(design.cols());

    std::vector<bool> observed(tau);
    int n_obs = 0;
    for (int t = 0; t < tau; ++t) {
        observed[t] = !std::isnan(series(t));
        n_obs += observed[t];
    }
    const int n_params = k + order.p_ar + order.q_ma + 1;
    if (n_obs <= n_params + 1) {
        throw DataError("too few observations (" + std::to_string(n_obs) + ") for regARMA(" +
                        std::to_string(order.p_ar) + "," + std::to_string(order.q_ma) + ") with " +
                        std::to_string(k) + " regressors");
    }

    Eigen::MatrixXd data(tau, 1 + k);
    data.col(0) = series;
    data.rightCols(k) = design;
    for (int t = 0; t < tau; ++t) {
        if (!observed[t]) data(t, 0) = 0.0;  // never read; keeps the block NaN-free
    }

    BaselineFit fit;
    fit.kind = order.p_ar == 1 && order.q_ma == 0 ? BaselineKind::regar1 : BaselineKind::regarma;
    fit.order = order;

    ArmaCoefficients coef;
    ProfileFit best;
    if (order.p_ar + order.q_ma == 0) {
        const ArmaStateSpace ss = make_arma_ss(Eigen::VectorXd(), Eigen::VectorXd());
        best = profile_fit(ss, data, observed, n_obs);
        fit.converged = best.ok;
    } else {
        const int dim = order.p_ar + order.q_ma;
        const auto objective = [&](const Eigen::VectorXd& z) {
            const ArmaCoefficients c = decode(z, order);
            const ProfileFit p = profile_fit(make_arma_ss(c.ar, c.ma), data, observed, n_obs);
            return p.ok ? -p.loglik : 1e100;
        };
        NmResult nm = nelder_mead(objective, Eigen::VectorXd::Zero(dim), 0.5,
                                  400 + 150 * dim, 1e-10);
        // One refinement pass from the incumbent tightens flat valleys.
        const NmResult nm2 = nelder_mead(objective, nm.x, 0.05, 200 + 80 * dim, 1e-11);
        const bool conv = nm.converged || nm2.converged;
        const Eigen::VectorXd z = nm2.f < nm.f ? nm2.x : nm.x;
        coef = decode(z, order);
        best = profile_fit(make_arma_ss(coef.ar, coef.ma), data, observed, n_obs);
        fit.converged = conv && best.ok && roots_identified(coef.ar, coef.ma);
    }
    if (!best.ok) {
        throw NumericError("regARMA(" + std::to_string(order.p_ar) + "," +
                           std::to_string(order.q_ma) + ") likelihood evaluation failed");
    }

    fit.coefficients = best.beta;
    fit.ar = coef.ar;
    fit.ma = coef.ma;
    fit.sigma2 = best.sigma2;
    fit.loglik = best.loglik;
    fit.aicc = aicc_of(best.loglik, n_params, n_obs);

    Eigen::VectorXd resid = series - design * best.beta;
    const ArmaStateSpace ss = make_arma_ss(fit.ar, fit.ma);
    for (int t = 0; t < tau; ++t) {
        if (!observed[t]) resid(t) = 0.0;  // skipped by the filter
    }
    fit.terminal_state = terminal_filter_state(ss, resid, observed);
    return fit;
}

ArmaOrder select_order_aicc(const Eigen::VectorXd& series, const Eigen::MatrixXd& design,
                            int max_p, int max_q) {
    bool any = false;
    ArmaOrder best_order;
    double best_aicc = std::numeric_limits<double>::infinity();
    for (int p = 0; p <= max_p; ++p) {
        for (int q = 0; q <= max_q; ++q) {
            BaselineFit fit;
            try {
                fit = fit_regarma(series, design, ArmaOrder{p, q});
            } catch (const Error&) {
                continue;
            }
            if (!fit.converged || !std::isfinite(fit.aicc)) continue;
            const bool better =
                fit.aicc < best_aicc - 1e-12 ||
                (std::abs(fit.aicc - best_aicc) <= 1e-12 &&
                 (p + q < best_order.p_ar + best_order.q_ma ||
                  (p + q == best_order.p_ar + best_order.q_ma && p < best_order.p_ar)));
            if (!any || better) {
                any = true;
                best_aicc = fit.aicc;
                best_order = ArmaOrder{p, q};
            }
        }
    }
    if (!any) throw DataError("every cell of the ARMA order grid failed to fit");
    return best_order;
}

Eigen::VectorXd forecast_baseline(const BaselineFit& fit, const Eigen::MatrixXd& design_event) {
    if (!design_event.allFinite()) {
        throw DataError("event-window design matrix has missing values");
    }
    if (design_event.cols() != fit.coefficients.size()) {
        throw ConfigError("event-window design width does not match the fitted coefficients");
    }
    Eigen::VectorXd out = design_event * fit.coefficients;
    if (fit.kind == BaselineKind::lm || fit.ar.size() + fit.ma.size() == 0) {
        return out;
    }
    const ArmaStateSpace ss = make_arma_ss(fit.ar, fit.ma);
    Eigen::VectorXd alpha = fit.terminal_state;
    for (int h = 0; h < out.size(); ++h) {
        alpha = ss.t * alpha;
        out(h) += alpha(0);
    }
    return out;
}

Eigen::VectorXd baseline_insample_normal(const BaselineFit& fit, const Eigen::VectorXd& series,
                                         const Eigen::MatrixXd& design) {
    check_dimensions(series, design);
    Eigen::VectorXd nc = design * fit.coefficients;
    if (fit.kind == BaselineKind::lm || fit.ar.size() + fit.ma.size() == 0) {
        return nc;
    }
    // One-step-ahead prediction of the ARMA error before each update.
    const ArmaStateSpace ss = make_arma_ss(fit.ar, fit.ma);
    const int tau = static_cast<int>(series.size());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ss.m);
    Eigen::MatrixXd p = ss.p0;
    for (int t = 0; t < tau; ++t) {
        const bool obs = !std::isnan(series(t));
        nc(t) += a(0);
        if (obs) {
            const double f = p(0, 0);
            if (f > 1e-300) {
                const double v = series(t) - nc(t);
                const Eigen::VectorXd gain = p.col(0) / f;
                a.noalias() += gain * v;
                p.noalias() -= gain * p.row(0);
            }
        }
        a = ss.t * a;
        p = ss.t * p * ss.t.transpose() + ss.r * ss.r.transpose();
    }
    return nc;
}

PanelBaselineResult fit_baseline_panel(const Panel& panel, const WindowSplit& split,
                                       BaselineKind kind, int threads) {
    const int n = panel.n_stations();
    const int tau0 = split.tau0();
    const int tau1 = split.tau1();
    PanelBaselineResult result;
    result.fits.resize(n);
    result.normal_values =
        Eigen::MatrixXd::Constant(n, panel.n_times(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> warnings(n);

    const auto run_station = [&](int s) {
        const Eigen::VectorXd series =
            panel.observations().row(s).segment(split.t0, tau0).transpose();
        const Eigen::MatrixXd design = panel.design_matrix(s, split.t0, split.t1);
        BaselineFit fit;
        switch (kind) {
            case BaselineKind::lm:
                fit = fit_lm(series, design);
                break;
            case BaselineKind::regar1:
                try {
                    fit = fit_regarma(series, design, ArmaOrder{1, 0});
                    if (!fit.converged) throw NumericError("regAR1 did not converge");
                } catch (const Error& e) {
                    warnings[s] = panel.stations()[s].id + ": " + e.what() + "; fell back to lm";
                    fit = fit_lm(series, design);
                }
                break;
            case BaselineKind::regarma:
                try {
                    const ArmaOrder order = select_order_aicc(series, design);
                    fit = fit_regarma(series, design, order);
                } catch (const Error& e) {
                    warnings[s] = panel.stations()[s].id + ": " + e.what() + "; fell back to lm";
                    fit = fit_lm(series, design);
                }
                break;
        }
        fit.station_id = panel.stations()[s].id;
        result.fits[s] = fit;

        const Eigen::VectorXd in_sample = baseline_insample_normal(fit, series, design);
        result.normal_values.row(s).segment(split.t0, tau0) = in_sample.transpose();
        if (tau1 > 0) {
            const Eigen::MatrixXd design_event =
                panel.design_matrix(s, split.t1 + 1, split.t_end);
            result.normal_values.row(s).segment(split.t1 + 1, tau1) =
                forecast_baseline(fit, design_event).transpose();
        }
    };

    if (threads <= 1 || n == 1) {
        for (int s = 0; s < n; ++s) run_station(s);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        const int n_threads = std::min(threads, n);
        pool.reserve(n_threads);
        std::atomic<bool> failed{false};
        std::string first_error;
        std::mutex err_mutex;
        for (int i = 0; i < n_threads; ++i) {
            pool.emplace_back([&] {
                for (int s = next.fetch_add(1); s < n; s = next.fetch_add(1)) {
                    if (failed.load()) return;
                    try {
                        run_station(s);
                    } catch (const std::exception& e) {
                        std::scoped_lock lock(err_mutex);
                        failed.store(true);
                        if (first_error.empty()) first_error = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failed.load()) throw DataError(first_error);
    }

    for (auto& w : warnings) {
        if (!w.empty()) result.warnings.push_back(w);
    }
    return result;
}

std::string baseline_summary_csv(const std::vector<BaselineFit>& fits) {
    std::string out = csv_line({"station_id", "model_kind", "p_ar", "q_ma", "aicc",
                                "residual_variance"});
    for (const auto& fit : fits) {
        std::ostringstream aicc, var;
        aicc.precision(10);
        var.precision(10);
        aicc << fit.aicc;
        var << fit.sigma2;
        out += csv_line({fit.station_id, to_string(fit.kind), std::to_string(fit.order.p_ar),
                         std::to_string(fit.order.q_ma), aicc.str(), var.str()});
    }
    return out;
}

}  // namespace stes
