#include "stes/eventstudy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "stes/csv.hpp"
#include "stes/errors.hpp"

namespace stes {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double student_t_cdf(double x, double df) {
    if (!std::isfinite(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(boost::math::students_t_distribution<double>(df), x);
}

double reference_cdf(const TestResult& r, double x) {
    return r.reference == ReferenceDist::student_t ? student_t_cdf(x, r.df) : normal_cdf(x);
}

void finalize(TestResult& r) {
    r.p_left = reference_cdf(r, r.value);
    r.stars = stars_for(r.p_left);
}

TestResult make_stat(std::string id, StatFamily family, bool adjusted, double value,
                     ReferenceDist ref, double df = 0.0) {
    TestResult r;
    r.stat_id = std::move(id);
    r.family = family;
    r.cd_adjusted = adjusted;
    r.value = value;
    r.reference = ref;
    r.df = df;
    finalize(r);
    return r;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v, double mean) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Moment skewness m3 / m2^(3/2) with central moments over n.
double moment_skewness(const std::vector<double>& v, double mean) {
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

/// Mid-ranks (ties averaged), 1-based.
std::vector<double> mid_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

bool in_event(const WindowSplit& split, int t) { return t > split.t1 && t <= split.t_end; }

/// Stations usable by CAC-based parametric statistics: included in the
/// abnormal panel and with a complete event window.
std::vector<int> complete_event_stations(const AbnormalPanel& abn) {
    std::vector<int> out;
    for (int s : abn.included) {
        bool complete = true;
        for (int t = abn.split.t1 + 1; t <= abn.split.t_end; ++t) {
            if (std::isnan(abn.ac(s, t))) {
                complete = false;
                break;
            }
        }
        if (complete) out.push_back(s);
    }
    return out;
}

struct RankSeries {
    std::vector<int> stations;            // subset of abn.included
    Eigen::MatrixXd u;                    // |stations| x tau window, NaN where missing
    std::vector<double> var_u;            // per-station population variance of U
    std::vector<int> count;               // per-station non-missing count tau_s
};

/// Scaled mid-ranks U = K/(tau_s+1) - 1/2 of each station's abnormal values
/// over both windows. Stations with fewer than 30 points or all-tied values
/// are skipped.
RankSeries build_rank_series(const AbnormalPanel& abn, std::vector<std::string>* warnings) {
    const WindowSplit& w = abn.split;
    const int width = w.t_end - w.t0 + 1;
    RankSeries rs;
    std::vector<Eigen::VectorXd> rows;
    for (int s : abn.included) {
        std::vector<int> times;
        std::vector<double> vals;
        for (int t = w.t0; t <= w.t_end; ++t) {
            if (!std::isnan(abn.ac(s, t))) {
                times.push_back(t);
                vals.push_back(abn.ac(s, t));
            }
        }
        const int tau_s = static_cast<int>(vals.size());
        if (tau_s < abn.min_rank_points) {
            if (warnings) {
                warnings->push_back("station " + abn.station_ids[s] +
                                    " skipped by rank statistics: only " +
                                    std::to_string(tau_s) + " usable points");
            }
            continue;
        }
        const bool all_tied =
            *std::max_element(vals.begin(), vals.end()) == *std::min_element(vals.begin(), vals.end());
        if (all_tied) {
            if (warnings) {
                warnings->push_back("station " + abn.station_ids[s] +
                                    " skipped by rank statistics: all values tied");
            }
            continue;
        }
        const std::vector<double> ranks = mid_ranks(vals);
        Eigen::VectorXd u = Eigen::VectorXd::Constant(width, kNaN);
        double ss = 0.0;
        for (int i = 0; i < tau_s; ++i) {
            const double ui = ranks[i] / (tau_s + 1.0) - 0.5;
            u(times[i] - w.t0) = ui;
            ss += ui * ui;
        }
        rs.stations.push_back(s);
        rows.push_back(std::move(u));
        rs.var_u.push_back(ss / tau_s);
        rs.count.push_back(tau_s);
    }
    rs.u.resize(static_cast<int>(rows.size()), width);
    for (size_t i = 0; i < rows.size(); ++i) rs.u.row(static_cast<int>(i)) = rows[i];
    return rs;
}

double patell_scale(const WindowSplit& split) {
    const double tau0 = split.tau0();
    if (tau0 <= 4.0) {
        throw DataError("Patell-type statistics need tau0 > 4, got " + std::to_string(split.tau0()));
    }
    return (tau0 - 2.0) / (tau0 - 4.0);
}

/// Abnormal value centered at the station's estimation-window mean. The
/// parametric statistics work on these so that a common affine map of the
/// abnormal values leaves them unchanged (residual-style inputs).
double centered_ac(const AbnormalPanel& abn, int s, int t) {
    return abn.ac(s, t) - abn.mean_hat(s);
}

std::vector<double> csar_values(const AbnormalPanel& abn, const std::vector<int>& stations) {
    std::vector<double> csar;
    csar.reserve(stations.size());
    for (int s : stations) {
        double sum = 0.0;
        for (int t = abn.split.t1 + 1; t <= abn.split.t_end; ++t) {
            sum += centered_ac(abn, s, t) / abn.sigma_hat(s);
        }
        csar.push_back(sum);
    }
    return csar;
}

}  // namespace

std::string to_string(StatFamily family) {
    switch (family) {
        case StatFamily::t_family: return "t";
        case StatFamily::patell: return "patell";
        case StatFamily::bmp: return "bmp";
        case StatFamily::corrado: return "corrado";
        case StatFamily::grank: return "grank";
    }
    return "?";
}

std::string stars_for(double p_left) {
    if (std::isnan(p_left)) return "";
    if (p_left < 0.01) return "***";
    if (p_left < 0.05) return "**";
    if (p_left < 0.10) return "*";
    return ".";
}

AbnormalPanel compute_abnormal(const Panel& panel, const Eigen::MatrixXd& normal_values,
                               const WindowSplit& split, const AbnormalOptions& options) {
    if (normal_values.rows() != panel.n_stations() || normal_values.cols() != panel.n_times()) {
        throw ConfigError("normal-value matrix is not aligned with the panel");
    }
    split.validate();

    const int n = panel.n_stations();
    AbnormalPanel abn;
    abn.split = split;
    abn.min_rank_points = options.min_rank_points;
    abn.ac = Eigen::MatrixXd::Constant(n, panel.n_times(), kNaN);
    abn.cac = Eigen::VectorXd::Constant(n, kNaN);
    abn.sigma_hat = Eigen::VectorXd::Constant(n, kNaN);
    abn.mean_hat = Eigen::VectorXd::Constant(n, kNaN);
    abn.station_ids.reserve(n);
    for (const auto& st : panel.stations()) abn.station_ids.push_back(st.id);

    for (int s = 0; s < n; ++s) {
        for (int t = split.t0; t <= split.t_end; ++t) {
            const double obs = panel.observations()(s, t);
            const double nc = normal_values(s, t);
            if (!std::isnan(obs) && !std::isnan(nc)) abn.ac(s, t) = obs - nc;
        }
    }

    int count_exclusions = 0;
    for (int s = 0; s < n; ++s) {
        std::vector<double> est;
        for (int t = split.t0; t <= split.t1; ++t) {
            if (!std::isnan(abn.ac(s, t))) est.push_back(abn.ac(s, t));
        }
        double cac = 0.0;
        bool any_event = false;
        for (int t = split.t1 + 1; t <= split.t_end; ++t) {
            if (!std::isnan(abn.ac(s, t))) {
                cac += abn.ac(s, t);
                any_event = true;
            }
        }
        if (any_event) abn.cac(s) = cac;

        if (static_cast<int>(est.size()) < options.min_estimation_points) {
            ++count_exclusions;
            abn.warnings.push_back("station " + abn.station_ids[s] + " excluded: only " +
                                   std::to_string(est.size()) + " estimation-window points (need " +
                                   std::to_string(options.min_estimation_points) + ")");
            continue;
        }
        const double mean = mean_of(est);
        abn.mean_hat(s) = mean;
        double ss = 0.0;
        for (double x : est) ss += (x - mean) * (x - mean);
        const double denom = static_cast<double>(est.size()) - options.sigma_dof_adjust;
        const double sigma = std::sqrt(ss / denom);
        if (!(sigma > 0.0)) {
            abn.warnings.push_back("station " + abn.station_ids[s] +
                                   " excluded: zero abnormal-value variance in the estimation window");
            continue;
        }
        abn.sigma_hat(s) = sigma;
        abn.included.push_back(s);
    }
    if (abn.included.empty() && count_exclusions > 0) {
        throw DataError("every station was excluded from the abnormal panel");
    }

    if (abn.included.size() >= 2) {
        Eigen::MatrixXd est(static_cast<int>(abn.included.size()), split.tau0());
        for (size_t i = 0; i < abn.included.size(); ++i) {
            est.row(static_cast<int>(i)) =
                abn.ac.row(abn.included[i]).segment(split.t0, split.tau0());
        }
        const CorrelationSummary cs = mean_pairwise_correlation(est);
        abn.r_bar = cs.mean;
        if (cs.dropped_pairs > 0) {
            abn.warnings.push_back(std::to_string(cs.dropped_pairs) +
                                   " station pairs dropped from the mean correlation");
        }
    } else {
        abn.r_bar = 0.0;
    }
    return abn;
}

std::vector<TestResult> t_family(const AbnormalPanel& abn) {
    const std::vector<int> stations = complete_event_stations(abn);
    const int m = static_cast<int>(stations.size());
    if (m < 3) {
        throw DataError("t-family statistics need >= 3 stations with complete event windows");
    }
    std::vector<double> cac;
    cac.reserve(m);
    for (int s : stations) {
        cac.push_back(abn.cac(s) - abn.split.tau1() * abn.mean_hat(s));
    }
    const double mean = mean_of(cac);
    const double sd = sample_sd(cac, mean);
    if (!(sd > 0.0) && mean != 0.0) {
        throw DataError("zero cross-sectional variance of CAC");
    }

    std::vector<TestResult> out;
    const double cross_t = sd > 0.0 ? mean / (sd / std::sqrt(static_cast<double>(m))) : 0.0;
    out.push_back(make_stat("cross_T_test", StatFamily::t_family, false, cross_t,
                            ReferenceDist::student_t, m - 1));

    // Brown-Warner crude dependence adjustment: time-series variance of the
    // cross-station mean abnormal value.
    const WindowSplit& w = abn.split;
    std::vector<double> abar_est;
    double sum_event = 0.0;
    int n_event_times = 0;
    for (int t = w.t0; t <= w.t_end; ++t) {
        double sum = 0.0;
        int cnt = 0;
        for (int s : abn.included) {
            if (!std::isnan(abn.ac(s, t))) {
                sum += centered_ac(abn, s, t);
                ++cnt;
            }
        }
        if (cnt == 0) continue;
        const double abar = sum / cnt;
        if (in_event(w, t)) {
            sum_event += abar;
            ++n_event_times;
        } else {
            abar_est.push_back(abar);
        }
    }
    if (abar_est.size() < 2 || n_event_times == 0) {
        throw DataError("crude_dep_T_test needs usable times in both windows");
    }
    const double abar_mean = mean_of(abar_est);
    const double s_abar = sample_sd(abar_est, abar_mean);
    if (!(s_abar > 0.0) && sum_event != 0.0) {
        throw DataError("zero variance of the mean abnormal-value series");
    }
    const double crude = s_abar > 0.0
                             ? sum_event / (std::sqrt(static_cast<double>(n_event_times)) * s_abar)
                             : 0.0;
    out.push_back(make_stat("crude_dep_T_test", StatFamily::t_family, false, crude,
                            ReferenceDist::student_t, static_cast<double>(abar_est.size()) - 1.0));

    // Hall's monotone cubic form: the two-term version S + g S^2/3 loses
    // monotonicity in S and inverts power for large shifts.
    const double skew = moment_skewness(cac, mean);
    const double s_stat = sd > 0.0 ? mean / sd : 0.0;
    const double corrected = s_stat + skew * s_stat * s_stat / 3.0 +
                             skew * skew * s_stat * s_stat * s_stat / 27.0 + skew / (6.0 * m);
    const double t_skew = std::sqrt(static_cast<double>(m)) * corrected;
    out.push_back(make_stat("T_skew", StatFamily::t_family, false, t_skew,
                            ReferenceDist::student_t, m - 1));
    return out;
}

std::vector<TestResult> patell_family(const AbnormalPanel& abn) {
    const double kappa = patell_scale(abn.split);
    const std::vector<int> stations = complete_event_stations(abn);
    const int m = static_cast<int>(stations.size());
    if (m < 1) throw DataError("Patell statistics need at least one complete station");
    const std::vector<double> csar = csar_values(abn, stations);
    const double total = std::accumulate(csar.begin(), csar.end(), 0.0);
    const double tau1 = abn.split.tau1();
    const double z = total / std::sqrt(m * tau1 * kappa);

    const double dep = 1.0 + (m - 1.0) * abn.r_bar;
    if (dep <= 0.0) {
        throw DataError("pathological negative dependence: 1+(N-1)*r_bar <= 0");
    }
    std::vector<TestResult> out;
    out.push_back(make_stat("Z_patell", StatFamily::patell, false, z,
                            ReferenceDist::standard_normal));
    out.push_back(make_stat("Z_patell_adj", StatFamily::patell, true, z / std::sqrt(dep),
                            ReferenceDist::standard_normal));
    return out;
}

std::vector<TestResult> bmp_family(const AbnormalPanel& abn) {
    const double kappa = patell_scale(abn.split);
    const std::vector<int> stations = complete_event_stations(abn);
    const int m = static_cast<int>(stations.size());
    if (m < 3) throw DataError("BMP statistics need >= 3 stations with complete event windows");
    std::vector<double> scar = csar_values(abn, stations);
    const double scale = std::sqrt(abn.split.tau1() * kappa);
    for (double& v : scar) v /= scale;
    const double mean = mean_of(scar);
    const double sd = sample_sd(scar, mean);
    if (!(sd > 0.0) && mean != 0.0) {
        throw DataError("zero cross-sectional variance of SCAR");
    }
    const double z = sd > 0.0 ? std::sqrt(static_cast<double>(m)) * mean / sd : 0.0;
    const double dep = 1.0 + (m - 1.0) * abn.r_bar;
    if (dep <= 0.0) {
        throw DataError("pathological negative dependence: 1+(N-1)*r_bar <= 0");
    }
    const double adj = z * std::sqrt(std::max(1.0 - abn.r_bar, 0.0) / dep);

    std::vector<TestResult> out;
    out.push_back(make_stat("Z_BMP", StatFamily::bmp, false, z, ReferenceDist::student_t, m - 1));
    out.push_back(make_stat("Z_BMP_adj", StatFamily::bmp, true, adj,
                            ReferenceDist::student_t, m - 1));
    return out;
}

std::vector<TestResult> corrado_family(const AbnormalPanel& abn) {
    const WindowSplit& w = abn.split;
    RankSeries rs = build_rank_series(abn, nullptr);
    const int m = static_cast<int>(rs.stations.size());
    if (m < 1) throw DataError("rank statistics: no usable stations");
    const int width = static_cast<int>(rs.u.cols());

    std::vector<double> ubar(width, kNaN);
    std::vector<int> n_t(width, 0);
    for (int t = 0; t < width; ++t) {
        double sum = 0.0;
        int cnt = 0;
        for (int i = 0; i < m; ++i) {
            if (!std::isnan(rs.u(i, t))) {
                sum += rs.u(i, t);
                ++cnt;
            }
        }
        n_t[t] = cnt;
        if (cnt > 0) ubar[t] = sum / cnt;
    }

    double numer = 0.0, ss_plain = 0.0, ss_mod = 0.0, total_mean = 0.0;
    int tau_eff = 0, tau1_eff = 0;
    std::vector<double> est_vals, event_vals;
    for (int t = 0; t < width; ++t) {
        if (n_t[t] == 0) continue;
        ++tau_eff;
        ss_plain += ubar[t] * ubar[t];
        ss_mod += (static_cast<double>(n_t[t]) / m) * ubar[t] * ubar[t];
        total_mean += ubar[t];
        if (in_event(w, w.t0 + t)) {
            numer += ubar[t];
            ++tau1_eff;
            event_vals.push_back(ubar[t]);
        } else {
            est_vals.push_back(ubar[t]);
        }
    }
    if (tau1_eff == 0 || est_vals.size() < 2) {
        throw DataError("rank statistics need usable times in both windows");
    }
    total_mean /= tau_eff;
    const double s_plain = std::sqrt(ss_plain / tau_eff);
    const double s_mod = std::sqrt(ss_mod / tau_eff);
    if (!(s_plain > 0.0)) throw DataError("rank statistics: zero variance of mean ranks");

    std::vector<TestResult> out;
    const double sqrt_tau1 = std::sqrt(static_cast<double>(tau1_eff));
    out.push_back(make_stat("CumRank", StatFamily::corrado, true, numer / (sqrt_tau1 * s_plain),
                            ReferenceDist::standard_normal));
    out.push_back(make_stat("CumRank_mod", StatFamily::corrado, true, numer / (sqrt_tau1 * s_mod),
                            ReferenceDist::standard_normal));

    // Pooled two-sample t between event-window and estimation-window mean ranks.
    {
        const double m1 = mean_of(event_vals);
        const double m0 = mean_of(est_vals);
        const double n1 = static_cast<double>(event_vals.size());
        const double n0 = static_cast<double>(est_vals.size());
        double ss1 = 0.0, ss0 = 0.0;
        for (double v : event_vals) ss1 += (v - m1) * (v - m1);
        for (double v : est_vals) ss0 += (v - m0) * (v - m0);
        const double df = n0 + n1 - 2.0;
        const double sp = std::sqrt((ss0 + ss1) / df);
        const double t_val =
            sp > 0.0 ? (m1 - m0) / (sp * std::sqrt(1.0 / n0 + 1.0 / n1)) : 0.0;
        out.push_back(make_stat("CumRank_T", StatFamily::corrado, true, t_val,
                                ReferenceDist::student_t, df));
    }

    // Analytic variance under cross-sectional independence, with the exact
    // within-station without-replacement covariance -var_u/(tau_s-1).
    {
        double var = 0.0;
        for (int i = 0; i < m; ++i) {
            double sum_inv = 0.0, sum_inv2 = 0.0;
            for (int t = 0; t < width; ++t) {
                if (!in_event(w, w.t0 + t) || std::isnan(rs.u(i, t))) continue;
                const double inv = 1.0 / n_t[t];
                sum_inv += inv;
                sum_inv2 += inv * inv;
            }
            const double v = rs.var_u[i];
            var += v * sum_inv2 - v / (rs.count[i] - 1.0) * (sum_inv * sum_inv - sum_inv2);
        }
        if (!(var > 0.0)) throw DataError("rank statistics: zero analytic variance");
        out.push_back(make_stat("CumRank_Z", StatFamily::corrado, false, numer / std::sqrt(var),
                                ReferenceDist::standard_normal));
    }

    // Dependence absorbed through the centered sample variance of the
    // realized mean-rank series.
    {
        double ssc = 0.0;
        for (int t = 0; t < width; ++t) {
            if (n_t[t] == 0) continue;
            ssc += (ubar[t] - total_mean) * (ubar[t] - total_mean);
        }
        const double s_c = std::sqrt(ssc / (tau_eff - 1.0));
        if (!(s_c > 0.0)) throw DataError("rank statistics: zero variance of mean ranks");
        out.push_back(make_stat("CumRank_Z_adj", StatFamily::corrado, true,
                                numer / (sqrt_tau1 * s_c), ReferenceDist::standard_normal));
    }
    return out;
}

std::vector<TestResult> grank_family(const AbnormalPanel& abn) {
    const WindowSplit& w = abn.split;
    const double kappa = patell_scale(w);
    std::vector<int> stations;
    for (int s : complete_event_stations(abn)) {
        int cnt = 0;
        for (int t = w.t0; t <= w.t1; ++t) {
            if (!std::isnan(abn.ac(s, t))) ++cnt;
        }
        if (cnt + 1 >= abn.min_rank_points) stations.push_back(s);
    }
    const int m = static_cast<int>(stations.size());
    if (m < 1) throw DataError("generalized rank statistics: no usable stations");

    const double scar_scale = std::sqrt(w.tau1() * kappa);
    // Generalized series per station: estimation-window standardized values
    // plus one synthetic event observation, the SCAR.
    const int width = w.tau0() + 1;  // estimation positions + event slot
    Eigen::MatrixXd u = Eigen::MatrixXd::Constant(m, width, kNaN);
    std::vector<double> var_u(m);
    for (int i = 0; i < m; ++i) {
        const int s = stations[i];
        std::vector<int> pos;
        std::vector<double> vals;
        for (int t = w.t0; t <= w.t1; ++t) {
            if (!std::isnan(abn.ac(s, t))) {
                pos.push_back(t - w.t0);
                vals.push_back(centered_ac(abn, s, t) / abn.sigma_hat(s));
            }
        }
        double scar = 0.0;
        for (int t = w.t1 + 1; t <= w.t_end; ++t) {
            scar += centered_ac(abn, s, t) / abn.sigma_hat(s);
        }
        scar /= scar_scale;
        pos.push_back(width - 1);
        vals.push_back(scar);

        const std::vector<double> ranks = mid_ranks(vals);
        const double tot = static_cast<double>(vals.size());
        double ss = 0.0;
        for (size_t j = 0; j < vals.size(); ++j) {
            const double uj = ranks[j] / (tot + 1.0) - 0.5;
            u(i, pos[j]) = uj;
            ss += uj * uj;
        }
        var_u[i] = ss / tot;
    }

    std::vector<double> ubar(width, kNaN);
    std::vector<int> n_t(width, 0);
    for (int t = 0; t < width; ++t) {
        double sum = 0.0;
        int cnt = 0;
        for (int i = 0; i < m; ++i) {
            if (!std::isnan(u(i, t))) {
                sum += u(i, t);
                ++cnt;
            }
        }
        n_t[t] = cnt;
        if (cnt > 0) ubar[t] = sum / cnt;
    }
    if (n_t[width - 1] != m) throw NumericError("generalized rank: event slot incomplete");
    const double ubar_event = ubar[width - 1];

    // Analytic variance under independence (event-slot count is m).
    double var_e = 0.0;
    for (int i = 0; i < m; ++i) var_e += var_u[i];
    var_e /= static_cast<double>(m) * m;
    if (!(var_e > 0.0)) throw DataError("generalized rank: zero variance");
    const double z = ubar_event / std::sqrt(var_e);

    // Average pairwise correlation of the scaled-rank series over shared
    // estimation positions.
    double r_u = 0.0;
    if (m >= 2) {
        Eigen::MatrixXd est_u = u.leftCols(width - 1);
        try {
            r_u = mean_pairwise_correlation(est_u).mean;
        } catch (const DataError&) {
            r_u = 0.0;
        }
    }
    const double dep = 1.0 + (m - 1.0) * r_u;
    if (dep <= 0.0) {
        throw DataError("pathological negative rank dependence: 1+(N-1)*r_bar_U <= 0");
    }

    // Empirical variant: standardize by the realized spread of mean ranks
    // over all positions, then map to its Student-t form.
    int t_cnt = 0;
    double ss_ubar = 0.0;
    for (int t = 0; t < width; ++t) {
        if (n_t[t] == 0) continue;
        ++t_cnt;
        ss_ubar += ubar[t] * ubar[t];
    }
    const double s_ubar = std::sqrt(ss_ubar / t_cnt);
    if (!(s_ubar > 0.0)) throw DataError("generalized rank: zero variance of mean ranks");
    const double z_emp = ubar_event / s_ubar;
    const double df = t_cnt - 2.0;
    const double denom = std::max(t_cnt - 1.0 - z_emp * z_emp, 1e-12);
    const double t_grank = z_emp * std::sqrt(df / denom);

    std::vector<TestResult> out;
    out.push_back(make_stat("Z_grank", StatFamily::grank, false, z,
                            ReferenceDist::standard_normal));
    out.push_back(make_stat("Z_grank_adj", StatFamily::grank, true, z / std::sqrt(dep),
                            ReferenceDist::standard_normal));
    out.push_back(make_stat("T_grank", StatFamily::grank, true, t_grank,
                            ReferenceDist::student_t, df));
    return out;
}

StatRegistry StatRegistry::builtin() {
    StatRegistry reg;
    // Adjusted block first, then unadjusted, in report order.
    reg.entries_ = {
        {"P1", StatFamily::grank, true, false, "reserved extension slot"},
        {"P2", StatFamily::grank, true, false, "reserved extension slot"},
        {"Corrado_Tukey", StatFamily::corrado, true, false, "reserved extension slot"},
        {"Z_patell_adj", StatFamily::patell, true, true,
         "Patell (1976) Z divided by sqrt(1+(N-1)r_bar), Kolari-Pynnonen (2010)"},
        {"Z_BMP_adj", StatFamily::bmp, true, true,
         "Boehmer-Musumeci-Poulsen (1991) Z scaled by sqrt((1-r_bar)/(1+(N-1)r_bar))"},
        {"T_grank", StatFamily::grank, true, true,
         "Kolari-Pynnonen (2011) generalized rank t with empirical rank spread"},
        {"Z_grank_adj", StatFamily::grank, true, true,
         "generalized rank Z with the 1/sqrt(1+(N-1)r_bar_U) correction"},
        {"CumRank", StatFamily::corrado, true, true,
         "Corrado (1989) cumulative rank, realized mean-rank spread"},
        {"CumRank_mod", StatFamily::corrado, true, true,
         "Corrado-Zivney (1992) variant rescaling the variance by N_t/N"},
        {"CumRank_T", StatFamily::corrado, true, true,
         "pooled two-sample t of mean ranks between windows, df tau0+tau1-2"},
        {"CumRank_Z_adj", StatFamily::corrado, true, true,
         "Hagnas-Pynnonen (2014) style: centered sample variance of mean ranks"},
        {"cross_T_test", StatFamily::t_family, false, true,
         "Brown-Warner (1985) cross-sectional t on CAC"},
        {"crude_dep_T_test", StatFamily::t_family, false, true,
         "Brown-Warner (1985) crude dependence adjustment"},
        {"T_skew", StatFamily::t_family, false, true,
         "skewness-corrected t (Hall 1992 correction)"},
        {"Z_patell", StatFamily::patell, false, true, "Patell (1976) standardized-residual Z"},
        {"CumRank_Z", StatFamily::corrado, false, true,
         "Corrado (1989) rank Z with analytic independent-ranks variance"},
        {"Z_grank", StatFamily::grank, false, true,
         "Kolari-Pynnonen (2011) generalized rank Z, analytic variance"},
        {"Z_BMP", StatFamily::bmp, false, true, "Boehmer-Musumeci-Poulsen (1991) standardized t"},
    };
    return reg;
}

bool StatRegistry::contains(const std::string& id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return true;
    }
    return false;
}

const StatInfo& StatRegistry::info(const std::string& id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return e;
    }
    std::string ids;
    for (const auto& e : entries_) {
        if (!ids.empty()) ids += ", ";
        ids += e.id;
    }
    throw ConfigError("unknown statistic '" + id + "' (available: " + ids + ")");
}

void StatRegistry::register_external(const StatInfo& info, StatKernel kernel) {
    if (!kernel) throw ConfigError("external statistic needs a kernel");
    bool found = false;
    for (auto& e : entries_) {
        if (e.id == info.id) {
            e = info;
            e.implemented = true;
            found = true;
            break;
        }
    }
    if (!found) {
        StatInfo added = info;
        added.implemented = true;
        entries_.push_back(added);
    }
    external_[info.id] = std::move(kernel);
}

const StatKernel* StatRegistry::external_kernel(const std::string& id) const {
    const auto it = external_.find(id);
    return it == external_.end() ? nullptr : &it->second;
}

std::vector<std::string> StatRegistry::all_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries_.size());
    for (const auto& e : entries_) ids.push_back(e.id);
    return ids;
}

std::vector<TestResult> run_battery(const AbnormalPanel& abn,
                                    const std::vector<std::string>& stat_ids,
                                    const StatRegistry& registry, const BatteryOptions& options) {
    const std::vector<std::string> wanted = stat_ids.empty() ? registry.all_ids() : stat_ids;
    for (const auto& id : wanted) registry.info(id);  // unknown ids fail up front

    std::map<StatFamily, std::vector<TestResult>> cache;
    const auto family_results = [&](StatFamily family) -> const std::vector<TestResult>& {
        auto it = cache.find(family);
        if (it == cache.end()) {
            std::vector<TestResult> r;
            switch (family) {
                case StatFamily::t_family: r = t_family(abn); break;
                case StatFamily::patell: r = patell_family(abn); break;
                case StatFamily::bmp: r = bmp_family(abn); break;
                case StatFamily::corrado: r = corrado_family(abn); break;
                case StatFamily::grank: r = grank_family(abn); break;
            }
            it = cache.emplace(family, std::move(r)).first;
        }
        return it->second;
    };

    std::vector<TestResult> out;
    for (const auto& entry : registry.entries()) {
        const bool requested =
            std::find(wanted.begin(), wanted.end(), entry.id) != wanted.end();
        if (!requested) continue;
        if (const StatKernel* kernel = registry.external_kernel(entry.id)) {
            TestResult r = (*kernel)(abn);
            r.stat_id = entry.id;
            r.family = entry.family;
            r.cd_adjusted = entry.cd_adjusted;
            finalize(r);
            out.push_back(std::move(r));
            continue;
        }
        if (!entry.implemented) {
            TestResult r;
            r.stat_id = entry.id;
            r.family = entry.family;
            r.cd_adjusted = entry.cd_adjusted;
            r.available = false;
            r.value = kNaN;
            r.p_left = kNaN;
            out.push_back(std::move(r));
            continue;
        }
        for (const TestResult& r : family_results(entry.family)) {
            if (r.stat_id == entry.id) {
                out.push_back(r);
                break;
            }
        }
    }
    if (options.two_sided) {
        for (auto& r : out) {
            if (!r.available) continue;
            const double two = 2.0 * std::min(r.p_left, 1.0 - r.p_left);
            r.stars = stars_for(two);
        }
    }
    return out;
}

std::string battery_csv(const std::vector<TestResult>& results) {
    std::string out = csv_line({"stat_id", "family", "cd_adjusted", "value", "p_left", "stars"});
    for (const auto& r : results) {
        std::ostringstream value, p;
        value.precision(10);
        p.precision(10);
        if (r.available) {
            value << r.value;
            p << r.p_left;
        } else {
            value << "NA";
            p << "NA";
        }
        out += csv_line({r.stat_id, to_string(r.family), r.cd_adjusted ? "1" : "0", value.str(),
                         p.str(), r.available ? r.stars : "unavailable"});
    }
    return out;
}

std::string battery_json(const std::vector<TestResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json e;
        e["stat_id"] = r.stat_id;
        e["family"] = to_string(r.family);
        e["cd_adjusted"] = r.cd_adjusted;
        e["available"] = r.available;
        if (r.available) {
            e["value"] = r.value;
            e["p_left"] = r.p_left;
            e["stars"] = r.stars;
            e["reference"] =
                r.reference == ReferenceDist::student_t
                    ? "student_t(" + std::to_string(r.df) + ")"
                    : "standard_normal";
        }
        j.push_back(std::move(e));
    }
    return j.dump(2);
}

std::string plot_data_csv(const AbnormalPanel& abn, const std::vector<Date>& timeline) {
    std::string out = csv_line({"date", "mean_ac", "lower", "upper", "event_window"});
    const WindowSplit& w = abn.split;
    for (int t = w.t0; t <= w.t_end; ++t) {
        double sum = 0.0, ss = 0.0;
        int cnt = 0;
        for (int s : abn.included) {
            const double v = abn.ac(s, t);
            if (!std::isnan(v)) {
                sum += v;
                ss += v * v;
                ++cnt;
            }
        }
        std::ostringstream mean_s, lo_s, hi_s;
        mean_s.precision(10);
        lo_s.precision(10);
        hi_s.precision(10);
        if (cnt > 0) {
            const double mean = sum / cnt;
            double half = 0.0;
            if (cnt > 1) {
                const double sd = std::sqrt(std::max(ss - cnt * mean * mean, 0.0) / (cnt - 1));
                half = 1.96 * sd / std::sqrt(static_cast<double>(cnt));
            }
            mean_s << mean;
            lo_s << mean - half;
            hi_s << mean + half;
        } else {
            mean_s << "NA";
            lo_s << "NA";
            hi_s << "NA";
        }
        out += csv_line({timeline[t].to_string(), mean_s.str(), lo_s.str(), hi_s.str(),
                         in_event(w, t) ? "1" : "0"});
    }
    return out;
}

}  // namespace stes
