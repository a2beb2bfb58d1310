#include "stes/hdgm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stes/errors.hpp"

namespace stes {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// Cholesky with the one-shot jitter policy: on failure the diagonal gets
/// +jitter once; a second failure is fatal.
Eigen::LLT<Eigen::MatrixXd> llt_with_jitter(const Eigen::MatrixXd& a, double jitter,
                                            const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    llt.compute(aj);
    if (llt.info() == Eigen::Success) return llt;
    throw NumericError(std::string(what) + ": matrix not positive definite even after jitter");
}

/// Per-window slice of the panel used by the filter: responses, designs and
/// the indexes of observed stations at each time point.
struct FilterData {
    Eigen::MatrixXd y;                    // N x tau0, NaN = missing
    std::vector<Eigen::MatrixXd> design;  // tau0 matrices, N x k
    std::vector<std::vector<int>> observed;
    int n = 0;
    int tau = 0;
    int k = 0;
    long n_obs_cells = 0;

    Eigen::MatrixXd design_cross() const {  // sum over observed cells of x x'
        Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
        for (int t = 0; t < tau; ++t) {
            for (int s : observed[t]) {
                xtx.noalias() += design[t].row(s).transpose() * design[t].row(s);
            }
        }
        return xtx;
    }
};

FilterData build_filter_data(const Panel& panel, const WindowSplit& split, int k_expected) {
    if (split.t0 < panel.first_usable()) {
        throw DataError("window starts before the first lag-valid index");
    }
    FilterData d;
    d.n = panel.n_stations();
    d.tau = split.tau0();
    d.k = panel.n_covariates() + 1;
    if (d.k != k_expected) {
        throw ConfigError("beta has " + std::to_string(k_expected) + " entries but the panel has " +
                          std::to_string(d.k) + " design columns (intercept + covariates)");
    }
    d.y = panel.observations().middleCols(split.t0, d.tau);
    d.design.reserve(d.tau);
    d.observed.resize(d.tau);
    for (int t = 0; t < d.tau; ++t) {
        d.design.push_back(panel.design_at_time(split.t0 + t));
        for (int s = 0; s < d.n; ++s) {
            if (!std::isnan(d.y(s, t))) d.observed[t].push_back(s);
        }
        d.n_obs_cells += static_cast<long>(d.observed[t].size());
    }
    return d;
}

struct FilterPass {
    double loglik = 0.0;
    // Indexed by window time; only filled when keep_history is set.
    std::vector<Eigen::VectorXd> a_pred, a_filt;
    std::vector<Eigen::MatrixXd> p_pred, p_filt;
    Eigen::VectorXd terminal_state;  // filtered mean at the last window index
};

FilterPass run_filter(const FilterData& d, const HdgmParams& params, const Eigen::MatrixXd& gamma,
                      const Eigen::MatrixXd& p_init, bool keep_history) {
    const int n = d.n;
    const double g = params.g;
    const double s2 = params.sigma2_eps;

    FilterPass out;
    if (keep_history) {
        out.a_pred.resize(d.tau);
        out.a_filt.resize(d.tau);
        out.p_pred.resize(d.tau);
        out.p_filt.resize(d.tau);
    }

    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd p = p_init;
    for (int t = 0; t < d.tau; ++t) {
        if (keep_history) {
            out.a_pred[t] = a;
            out.p_pred[t] = p;
        }
        const auto& obs = d.observed[t];
        const int m = static_cast<int>(obs.size());
        Eigen::VectorXd a_f = a;
        Eigen::MatrixXd p_f = p;
        if (m > 0) {
            Eigen::VectorXd resid(m);
            Eigen::MatrixXd p_rows(m, n);
            for (int i = 0; i < m; ++i) {
                const int s = obs[i];
                resid(i) = d.y(s, t) - d.design[t].row(s).dot(params.beta) - a(s);
                p_rows.row(i) = p.row(s);
            }
            Eigen::MatrixXd f(m, m);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) f(i, j) = p(obs[i], obs[j]);
            }
            f.diagonal().array() += s2;
            Eigen::LLT<Eigen::MatrixXd> llt(f);
            if (llt.info() != Eigen::Success) {
                throw NumericError("innovation covariance not positive definite");
            }
            double logdet = 0.0;
            for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
            const Eigen::VectorXd fi_resid = llt.solve(resid);
            out.loglik -= 0.5 * (m * kLog2Pi + logdet + resid.dot(fi_resid));
            if (!std::isfinite(out.loglik)) {
                throw NumericError("non-finite log-likelihood during filtering");
            }

            const Eigen::MatrixXd gain = llt.solve(p_rows).transpose();  // N x m
            a_f.noalias() += gain * resid;
            p_f.noalias() -= gain * p_rows;
            p_f = 0.5 * (p_f + p_f.transpose());
        }
        if (keep_history) {
            out.a_filt[t] = a_f;
            out.p_filt[t] = p_f;
        }
        if (t == d.tau - 1) out.terminal_state = a_f;
        a = g * a_f;
        p = g * g * p_f + gamma;
        p = 0.5 * (p + p.transpose());
    }
    return out;
}

/// Sums of smoothed second moments feeding the EM updates.
struct MomentSums {
    Eigen::MatrixXd s11, s10, s00;  // over transitions t=2..tau
    Eigen::MatrixXd e1;             // E[w_1 w_1'] for the stationary-prior term
};

struct SmoothPass {
    Eigen::MatrixXd states;     // N x tau
    Eigen::MatrixXd variances;  // N x tau (marginal)
    std::vector<Eigen::MatrixXd> lag_one;
    Eigen::VectorXd terminal_state;
    double loglik = 0.0;
    MomentSums moments;
};

SmoothPass run_smoother(const FilterData& d, const HdgmParams& params, const Eigen::MatrixXd& gamma,
                        const Eigen::MatrixXd& p_init, bool want_lag_matrices, bool want_moments) {
    const int n = d.n;
    const double g = params.g;
    FilterPass f = run_filter(d, params, gamma, p_init, /*keep_history=*/true);

    SmoothPass out;
    out.loglik = f.loglik;
    out.terminal_state = f.terminal_state;
    out.states.resize(n, d.tau);
    out.variances.resize(n, d.tau);
    if (want_lag_matrices) out.lag_one.resize(d.tau > 1 ? d.tau - 1 : 0);
    if (want_moments) {
        out.moments.s11 = Eigen::MatrixXd::Zero(n, n);
        out.moments.s10 = Eigen::MatrixXd::Zero(n, n);
        out.moments.s00 = Eigen::MatrixXd::Zero(n, n);
    }

    Eigen::VectorXd w_next = f.a_filt[d.tau - 1];
    Eigen::MatrixXd v_next = f.p_filt[d.tau - 1];
    out.states.col(d.tau - 1) = w_next;
    out.variances.col(d.tau - 1) = v_next.diagonal();
    if (want_moments && d.tau > 1) {
        out.moments.s11.noalias() += v_next + w_next * w_next.transpose();
    }

    for (int t = d.tau - 2; t >= 0; --t) {
        // J_t = g P_{t|t} P_{t+1|t}^-1  (P_{t+1|t} is PD: it includes Gamma).
        Eigen::LDLT<Eigen::MatrixXd> pred(f.p_pred[t + 1]);
        const Eigen::MatrixXd j = g * pred.solve(f.p_filt[t]).transpose();

        const Eigen::VectorXd w_t = f.a_filt[t] + j * (w_next - f.a_pred[t + 1]);
        Eigen::MatrixXd v_t = f.p_filt[t] + j * (v_next - f.p_pred[t + 1]) * j.transpose();
        v_t = 0.5 * (v_t + v_t.transpose());

        // Cov(w_{t+1}, w_t | data) = V_{t+1} J_t'.
        if (want_lag_matrices || want_moments) {
            const Eigen::MatrixXd cross = v_next * j.transpose();
            if (want_lag_matrices) out.lag_one[t] = cross;
            if (want_moments) {
                out.moments.s10.noalias() += cross + w_next * w_t.transpose();
            }
        }
        if (want_moments) {
            out.moments.s00.noalias() += v_t + w_t * w_t.transpose();
            if (t > 0) out.moments.s11.noalias() += v_t + w_t * w_t.transpose();
        }

        out.states.col(t) = w_t;
        out.variances.col(t) = v_t.diagonal();
        if (want_moments && t == 0) {
            out.moments.e1 = v_t + w_t * w_t.transpose();
        }
        w_next = w_t;
        v_next = v_t;
    }
    if (want_moments && d.tau == 1) {
        out.moments.e1 = v_next + w_next * w_next.transpose();
    }
    return out;
}

Eigen::MatrixXd build_gamma(const Eigen::MatrixXd& matern, double nu) { return nu * matern; }

Eigen::MatrixXd build_p_init(const Eigen::MatrixXd& matern, const HdgmParams& p) {
    return (p.nu / (1.0 - p.g * p.g)) * matern;
}

double golden_section_max(double lo, double hi, const std::function<double(double)>& f,
                          double tol, int max_iter = 200) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

void HdgmParams::validate() const {
    if (!(std::abs(g) < 1.0)) throw NumericError("|g| must be < 1, got " + std::to_string(g));
    if (!(nu > 0.0)) throw NumericError("nu must be > 0, got " + std::to_string(nu));
    if (!(theta > 0.0)) throw NumericError("theta must be > 0, got " + std::to_string(theta));
    if (!(sigma2_eps > 0.0)) {
        throw NumericError("sigma2_eps must be > 0, got " + std::to_string(sigma2_eps));
    }
    if (beta.size() == 0) throw ConfigError("beta must not be empty");
    if (!beta.allFinite()) throw NumericError("beta has non-finite entries");
}

double matern_correlation(double d, double theta, double smoothness) {
    if (theta <= 0.0) throw NumericError("Matern range theta must be > 0");
    if (d < 0.0) throw NumericError("distance must be >= 0");
    const double r = d / theta;
    if (smoothness == 0.5) {
        return std::exp(-r);
    }
    if (smoothness == 1.5) {
        const double s = std::numbers::sqrt3 * r;
        return (1.0 + s) * std::exp(-s);
    }
    if (smoothness == 2.5) {
        const double s = std::sqrt(5.0) * r;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    throw ConfigError("unsupported Matern smoothness " + std::to_string(smoothness) +
                      " (supported: 0.5, 1.5, 2.5)");
}

Eigen::MatrixXd matern_matrix(const Eigen::MatrixXd& distances, double theta, double smoothness) {
    const int n = static_cast<int>(distances.rows());
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            m(i, j) = m(j, i) = matern_correlation(distances(i, j), theta, smoothness);
        }
    }
    return m;
}

StateSpaceRep make_state_space(const Panel& panel, const HdgmParams& params) {
    params.validate();
    const Eigen::MatrixXd dist = distance_matrix(panel).d;
    const Eigen::MatrixXd m = matern_matrix(dist, params.theta, params.smoothness);
    StateSpaceRep rep;
    rep.transition_g = params.g;
    rep.state_noise_cov = build_gamma(m, params.nu);
    rep.initial_state_cov = build_p_init(m, params);
    rep.obs_noise_var = params.sigma2_eps;
    // The jitter policy is exercised here so an unusable layout fails early.
    llt_with_jitter(rep.state_noise_cov, 1e-10 * params.nu, "state noise covariance");
    return rep;
}

double kalman_loglik(const Panel& panel, const WindowSplit& split, const HdgmParams& params) {
    params.validate();
    const FilterData d = build_filter_data(panel, split, static_cast<int>(params.beta.size()));
    const StateSpaceRep rep = make_state_space(panel, params);
    const FilterPass f =
        run_filter(d, params, rep.state_noise_cov, rep.initial_state_cov, /*keep_history=*/false);
    return f.loglik;
}

KalmanSmoothResult kalman_smooth(const Panel& panel, const WindowSplit& split,
                                 const HdgmParams& params) {
    params.validate();
    const FilterData d = build_filter_data(panel, split, static_cast<int>(params.beta.size()));
    const StateSpaceRep rep = make_state_space(panel, params);
    SmoothPass sm = run_smoother(d, params, rep.state_noise_cov, rep.initial_state_cov,
                                 /*want_lag_matrices=*/true, /*want_moments=*/false);
    KalmanSmoothResult out;
    out.states = std::move(sm.states);
    out.variances = std::move(sm.variances);
    out.lag_one_cov = std::move(sm.lag_one);
    out.filtered_terminal_state = std::move(sm.terminal_state);
    out.loglik = sm.loglik;
    return out;
}

HdgmParams hdgm_default_init(const Panel& panel, const WindowSplit& split, double smoothness) {
    const FilterData d = build_filter_data(panel, split, panel.n_covariates() + 1);
    // Pooled OLS over all observed cells.
    Eigen::MatrixXd xtx = d.design_cross();
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(d.k);
    for (int t = 0; t < d.tau; ++t) {
        for (int s : d.observed[t]) {
            xty.noalias() += d.design[t].row(s).transpose() * d.y(s, t);
        }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success) {
        throw NumericError("pooled OLS design is singular during initialization");
    }
    const Eigen::VectorXd beta = ldlt.solve(xty);
    double rss = 0.0;
    for (int t = 0; t < d.tau; ++t) {
        for (int s : d.observed[t]) {
            const double r = d.y(s, t) - d.design[t].row(s).dot(beta);
            rss += r * r;
        }
    }
    const double resid_var =
        rss / std::max<long>(1, d.n_obs_cells - static_cast<long>(d.k));

    HdgmParams p;
    p.beta = beta;
    p.g = 0.5;
    p.sigma2_eps = std::max(0.5 * resid_var, 1e-8);
    p.nu = std::max(0.5 * resid_var, 1e-8);
    p.smoothness = smoothness;
    const double med = distance_matrix(panel).median_offdiagonal();
    p.theta = med > 0.0 ? med : 1.0;
    return p;
}

HdgmFitResult em_fit(const Panel& panel, const WindowSplit& split, const HdgmParams& init,
                     const HdgmFitOptions& options) {
    init.validate();
    const FilterData d = build_filter_data(panel, split, static_cast<int>(init.beta.size()));
    const long min_cells = 10L * d.k;
    if (d.n_obs_cells < min_cells) {
        throw DataError("estimation window has " + std::to_string(d.n_obs_cells) +
                        " usable observations; need at least " + std::to_string(min_cells));
    }

    const Eigen::MatrixXd dist = distance_matrix(panel).d;
    // Ranges below half the closest station separation are indistinguishable
    // from "no spatial correlation" and would let white noise masquerade as a
    // latent field; keep the search above that scale.
    double min_dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d.n; ++i) {
        for (int j = i + 1; j < d.n; ++j) min_dist = std::min(min_dist, dist(i, j));
    }
    const double theta_lo =
        std::isfinite(min_dist) && min_dist > 0.0 ? std::max(0.1, 0.5 * min_dist) : 0.1;
    const double theta_hi = std::max(10.0 * dist.maxCoeff(), theta_lo * 10.0);
    const double tau_n = static_cast<double>(d.tau) * d.n;

    // The pooled cross-product is constant across iterations.
    const Eigen::MatrixXd xtx = d.design_cross();
    Eigen::LDLT<Eigen::MatrixXd> xtx_ldlt(xtx);
    if (xtx_ldlt.info() != Eigen::Success) {
        throw NumericError("pooled design cross-product is singular");
    }

    HdgmFitResult result;
    result.params = init;
    HdgmParams cur = init;

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        Eigen::MatrixXd matern = matern_matrix(dist, cur.theta, cur.smoothness);
        SmoothPass sm = run_smoother(d, cur, build_gamma(matern, cur.nu), build_p_init(matern, cur),
                                     /*want_lag_matrices=*/false, /*want_moments=*/true);
        const double ll = sm.loglik;
        if (!result.loglik_trace.empty() && ll < prev_ll - 1e-8) {
            std::ostringstream msg;
            msg << "EM log-likelihood decreased from " << prev_ll << " to " << ll
                << " at iteration " << iter;
            throw NumericError(msg.str());
        }
        result.loglik_trace.push_back(ll);
        result.iterations = iter;
        result.smoothed_states = sm.states;
        result.smoothed_variances = sm.variances;
        result.params = cur;

        if (iter > 1 && std::abs(ll - prev_ll) < options.tol * (1.0 + std::abs(ll))) {
            result.converged = true;
            break;
        }
        prev_ll = ll;
        if (iter == options.max_iter) break;

        // ---- M-step ----
        // beta and sigma2_eps: exact joint maximizer of the observation part.
        Eigen::VectorXd xty = Eigen::VectorXd::Zero(d.k);
        for (int t = 0; t < d.tau; ++t) {
            for (int s : d.observed[t]) {
                xty.noalias() += d.design[t].row(s).transpose() * (d.y(s, t) - sm.states(s, t));
            }
        }
        const Eigen::VectorXd beta_new = xtx_ldlt.solve(xty);
        double sse = 0.0;
        for (int t = 0; t < d.tau; ++t) {
            for (int s : d.observed[t]) {
                const double r = d.y(s, t) - d.design[t].row(s).dot(beta_new) - sm.states(s, t);
                sse += r * r + sm.variances(s, t);
            }
        }
        const double sigma2_new = std::max(sse / static_cast<double>(d.n_obs_cells), 1e-12);

        // g: exact conditional maximizer of the state part given (nu, theta).
        // With the stationary initial prior the stationarity term
        // (N/2) log(1-g^2) enters, so the maximizer solves a smooth 1-D
        // condition rather than the plain moment ratio.
        const Eigen::LLT<Eigen::MatrixXd> m_llt =
            llt_with_jitter(matern, 1e-10, "Matern correlation matrix");
        const auto wtrace = [&](const Eigen::MatrixXd& b) {
            return m_llt.solve(b).trace();
        };
        const double a11 = wtrace(sm.moments.s11);
        const double a10 = wtrace(sm.moments.s10);
        const double a00 = wtrace(sm.moments.s00);
        const double ae1 = wtrace(sm.moments.e1);
        const double n_d = static_cast<double>(d.n);
        const auto q_state_g = [&](double g) {
            const double ag =
                a11 - 2.0 * g * a10 + g * g * a00 + (1.0 - g * g) * ae1;
            return 0.5 * n_d * std::log1p(-g * g) - 0.5 * ag / cur.nu;
        };
        const auto dq_dg = [&](double g) {
            return -n_d * g / (1.0 - g * g) + (a10 - g * (a00 - ae1)) / cur.nu;
        };
        double glo = -1.0 + 1e-12, ghi = 1.0 - 1e-12;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (glo + ghi);
            (dq_dg(mid) > 0.0 ? glo : ghi) = mid;
        }
        double g_new = 0.5 * (glo + ghi);
        if (q_state_g(g_new) < q_state_g(cur.g)) g_new = cur.g;

        // theta: bounded maximization on log theta with nu profiled out.
        const Eigen::MatrixXd b_mat = sm.moments.s11 -
                                      g_new * (sm.moments.s10 + sm.moments.s10.transpose()) +
                                      g_new * g_new * sm.moments.s00 +
                                      (1.0 - g_new * g_new) * sm.moments.e1;
        const auto q_theta = [&](double log_theta) {
            const Eigen::MatrixXd m = matern_matrix(dist, std::exp(log_theta), cur.smoothness);
            Eigen::LLT<Eigen::MatrixXd> llt;
            try {
                llt = llt_with_jitter(m, 1e-10, "Matern correlation matrix");
            } catch (const NumericError&) {
                return -std::numeric_limits<double>::infinity();
            }
            double logdet = 0.0;
            for (int i = 0; i < d.n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
            const double tr = llt.solve(b_mat).trace();
            const double nu_prof = std::max(tr / tau_n, 1e-10);
            return -0.5 * (static_cast<double>(d.tau) * logdet + tau_n * std::log(nu_prof));
        };
        const double log_theta_new =
            golden_section_max(std::log(theta_lo), std::log(theta_hi), q_theta, 1e-9);
        double theta_new = std::exp(log_theta_new);
        if (q_theta(log_theta_new) < q_theta(std::log(cur.theta))) theta_new = cur.theta;
        {
            const Eigen::MatrixXd m = matern_matrix(dist, theta_new, cur.smoothness);
            const Eigen::LLT<Eigen::MatrixXd> llt =
                llt_with_jitter(m, 1e-10, "Matern correlation matrix");
            cur.nu = std::max(llt.solve(b_mat).trace() / tau_n, 1e-10);
        }
        if (theta_new <= theta_lo * 1.0001 || theta_new >= theta_hi * 0.9999) {
            const std::string w = "theta hit the search bound (" + std::to_string(theta_new) + " km)";
            if (result.warnings.empty() || result.warnings.back() != w) result.warnings.push_back(w);
        }

        cur.beta = beta_new;
        cur.sigma2_eps = sigma2_new;
        cur.g = g_new;
        cur.theta = theta_new;
    }
    if (!result.converged) {
        result.warnings.push_back("EM stopped at max_iter without meeting the tolerance");
    }
    return result;
}

Eigen::MatrixXd forecast_normal(const Panel& panel, const WindowSplit& split,
                                const HdgmParams& params) {
    params.validate();
    const FilterData d = build_filter_data(panel, split, static_cast<int>(params.beta.size()));
    const StateSpaceRep rep = make_state_space(panel, params);
    const FilterPass f =
        run_filter(d, params, rep.state_noise_cov, rep.initial_state_cov, /*keep_history=*/false);

    const int tau1 = split.tau1();
    Eigen::MatrixXd nc(panel.n_stations(), tau1);
    double decay = 1.0;
    for (int h = 1; h <= tau1; ++h) {
        decay *= params.g;
        const Eigen::MatrixXd x = panel.design_at_time(split.t1 + h);  // throws on missing
        nc.col(h - 1) = x * params.beta + decay * f.terminal_state;
    }
    return nc;
}

Eigen::MatrixXd hdgm_insample_normal(const Panel& panel, const WindowSplit& split,
                                     const HdgmParams& params) {
    const KalmanSmoothResult sm = kalman_smooth(panel, split, params);
    Eigen::MatrixXd nc(panel.n_stations(), split.tau0());
    for (int t = 0; t < split.tau0(); ++t) {
        nc.col(t) = panel.design_at_time(split.t0 + t) * params.beta + sm.states.col(t);
    }
    return nc;
}

std::string hdgm_fit_to_json(const HdgmFitResult& fit) {
    nlohmann::json j;
    j["beta"] = std::vector<double>(fit.params.beta.data(),
                                    fit.params.beta.data() + fit.params.beta.size());
    j["g"] = fit.params.g;
    j["nu"] = fit.params.nu;
    j["theta"] = fit.params.theta;
    j["sigma2_eps"] = fit.params.sigma2_eps;
    j["smoothness"] = fit.params.smoothness;
    j["loglik"] = fit.loglik();
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j.dump(2);
}

HdgmFitResult hdgm_fit_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("cannot parse HDGM fit JSON: ") + e.what());
    }
    HdgmFitResult fit;
    try {
        const auto beta = j.at("beta").get<std::vector<double>>();
        fit.params.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                            static_cast<long>(beta.size()));
        fit.params.g = j.at("g").get<double>();
        fit.params.nu = j.at("nu").get<double>();
        fit.params.theta = j.at("theta").get<double>();
        fit.params.sigma2_eps = j.at("sigma2_eps").get<double>();
        fit.params.smoothness = j.value("smoothness", 0.5);
        fit.loglik_trace = {j.value("loglik", 0.0)};
        fit.iterations = j.value("iterations", 0);
        fit.converged = j.value("converged", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("HDGM fit JSON is missing fields: ") + e.what());
    }
    fit.params.validate();
    return fit;
}

}  // namespace stes
