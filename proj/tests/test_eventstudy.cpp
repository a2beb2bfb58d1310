#include "stes/eventstudy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stes/errors.hpp"
#include "test_helpers.hpp"

using namespace stes;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Hand-built abnormal panel: estimation ACs in `est` (stations x tau0) and
/// event ACs in `event` (stations x tau1). sigma_hat/mean_hat/cac are filled
/// the same way compute_abnormal would.
AbnormalPanel make_abnormal(const Eigen::MatrixXd& est, const Eigen::MatrixXd& event,
                            double r_bar = 0.0, int min_rank_points = 5) {
    const int n = static_cast<int>(est.rows());
    const int tau0 = static_cast<int>(est.cols());
    const int tau1 = static_cast<int>(event.cols());
    AbnormalPanel abn;
    abn.split = WindowSplit{0, tau0 - 1, tau0 + tau1 - 1};
    abn.min_rank_points = min_rank_points;
    abn.ac.resize(n, tau0 + tau1);
    abn.ac << est, event;
    abn.cac.resize(n);
    abn.sigma_hat.resize(n);
    abn.mean_hat.resize(n);
    abn.r_bar = r_bar;
    for (int s = 0; s < n; ++s) {
        abn.station_ids.push_back("S" + std::to_string(s + 1));
        abn.included.push_back(s);
        int n_est = 0;
        double sum = 0.0;
        for (int t = 0; t < tau0; ++t) {
            if (!std::isnan(est(s, t))) {
                sum += est(s, t);
                ++n_est;
            }
        }
        const double mean = sum / n_est;
        abn.mean_hat(s) = mean;
        double ss = 0.0;
        for (int t = 0; t < tau0; ++t) {
            if (!std::isnan(est(s, t))) ss += (est(s, t) - mean) * (est(s, t) - mean);
        }
        abn.sigma_hat(s) = std::sqrt(ss / n_est);
        double cac = 0.0;
        for (int t = 0; t < tau1; ++t) {
            if (!std::isnan(event(s, t))) cac += event(s, t);
        }
        abn.cac(s) = cac;
    }
    return abn;
}

/// Integer-valued estimation block whose rows sum to exactly zero, so the
/// station means are 0.0 bit-exactly and centered statistics coincide with
/// their raw forms.
Eigen::MatrixXd integer_zero_mean_est(int n, int tau0, unsigned seed = 90) {
    if (tau0 % 4 != 0) throw std::invalid_argument("tau0 must be a multiple of 4");
    std::mt19937 rng(seed);
    Eigen::MatrixXd est(n, tau0);
    std::vector<double> block = {-2, -1, 1, 2};
    for (int s = 0; s < n; ++s) {
        std::vector<double> row;
        for (int t = 0; t < tau0 / 4; ++t) row.insert(row.end(), block.begin(), block.end());
        std::shuffle(row.begin(), row.end(), rng);
        for (int t = 0; t < tau0; ++t) est(s, t) = row[t];
    }
    return est;
}

/// Zero-mean estimation block so centered and raw statistics coincide, with
/// unit variance per station.
Eigen::MatrixXd unit_noise_est(int n, int tau0, unsigned seed = 17) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd est(n, tau0);
    for (int s = 0; s < n; ++s) {
        for (int t = 0; t < tau0; ++t) est(s, t) = gauss(rng);
        const double mean = est.row(s).mean();
        est.row(s).array() -= mean;
        const double sd = std::sqrt(est.row(s).squaredNorm() / tau0);
        est.row(s) /= sd;
    }
    return est;
}

double value_of(const std::vector<TestResult>& results, const std::string& id) {
    for (const auto& r : results) {
        if (r.stat_id == id) return r.value;
    }
    ADD_FAILURE() << "statistic " << id << " not found";
    return kNaN;
}

const TestResult& result_of(const std::vector<TestResult>& results, const std::string& id) {
    for (const auto& r : results) {
        if (r.stat_id == id) return r;
    }
    throw std::runtime_error("statistic " + id + " not in results");
}

}  // namespace

// ---------------------------------------------------------------------------
// compute_abnormal

TEST(ComputeAbnormal, PerfectModelGivesZeroAcAndCac) {
    stes::test::RandomPanelSpec spec;
    spec.n_stations = 3;
    spec.tau = 50;
    spec.n_covariates = 0;
    spec.params = stes::test::default_params(0);
    spec.seed = 3;
    const Panel p = stes::test::make_model_panel(spec);
    const WindowSplit split{0, 39, 49};
    const AbnormalPanel abn = compute_abnormal(p, p.observations(), split);
    for (int s = 0; s < 3; ++s) {
        EXPECT_DOUBLE_EQ(abn.cac(s), 0.0);
        for (int t = 0; t < 50; ++t) EXPECT_DOUBLE_EQ(abn.ac(s, t), 0.0);
    }
    EXPECT_TRUE(abn.included.empty());  // zero-variance stations cannot feed statistics
    EXPECT_FALSE(abn.warnings.empty());
}

TEST(ComputeAbnormal, CacIsTheEventWindowSum) {
    stes::test::RandomPanelSpec spec;
    spec.n_stations = 2;
    spec.tau = 43;
    spec.n_covariates = 0;
    spec.params = stes::test::default_params(0);
    spec.seed = 4;
    const Panel p = stes::test::make_model_panel(spec);
    const WindowSplit split{0, 39, 42};
    Eigen::MatrixXd nc = p.observations();
    nc(0, 40) -= 1.0;
    nc(0, 41) -= 2.0;
    nc(0, 42) -= 3.0;
    // Estimation-window ACs need spread, otherwise the station is excluded.
    for (int t = 0; t < 40; ++t) nc(0, t) += ((t % 2) ? 0.5 : -0.5);
    for (int t = 0; t < 40; ++t) nc(1, t) += ((t % 3) ? 0.25 : -0.5);
    const AbnormalPanel abn = compute_abnormal(p, nc, split);
    EXPECT_NEAR(abn.cac(0), 6.0, 1e-12);
    EXPECT_NEAR(abn.cac(1), 0.0, 1e-12);
}

TEST(ComputeAbnormal, CacBlockAdditivity) {
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd est = unit_noise_est(2, 40);
    Eigen::MatrixXd event(2, 9);
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 9; ++t) event(s, t) = gauss(rng);
    const AbnormalPanel abn = make_abnormal(est, event);
    // Consecutive blocks of the event window sum to the total CAC.
    for (int s = 0; s < 2; ++s) {
        const double b1 = event.row(s).segment(0, 3).sum();
        const double b2 = event.row(s).segment(3, 4).sum();
        const double b3 = event.row(s).segment(7, 2).sum();
        EXPECT_NEAR(abn.cac(s), b1 + b2 + b3, 1e-12);
    }
}

TEST(ComputeAbnormal, SparseStationExcludedAndAllSparseFatal) {
    stes::test::RandomPanelSpec spec;
    spec.n_stations = 2;
    spec.tau = 50;
    spec.n_covariates = 0;
    spec.params = stes::test::default_params(0);
    spec.seed = 6;
    const Panel p = stes::test::make_model_panel(spec);
    const WindowSplit split{0, 39, 49};

    Eigen::MatrixXd nc = Eigen::MatrixXd::Constant(2, 50, kNaN);
    nc.row(0) = p.observations().row(0).array() + 1.0;  // complete, nonzero ACs
    for (int t = 0; t < 15; ++t) nc(1, t) = 0.0;        // only 15 usable points
    const AbnormalPanel abn = compute_abnormal(p, nc, split);
    EXPECT_EQ(abn.included.size(), 1u);
    EXPECT_EQ(abn.included[0], 0);
    ASSERT_FALSE(abn.warnings.empty());
    EXPECT_NE(abn.warnings[0].find("S2"), std::string::npos);

    const Eigen::MatrixXd all_nan = Eigen::MatrixXd::Constant(2, 50, kNaN);
    EXPECT_THROW(compute_abnormal(p, all_nan, split), DataError);
}

// ---------------------------------------------------------------------------
// t family

TEST(TFamily, CrossTFrozenValue) {
    // CAC = (-2, -1, -3, -2): mean -2, sample sd sqrt(2/3).
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    Eigen::MatrixXd event(4, 1);
    event << -2, -1, -3, -2;
    const AbnormalPanel abn = make_abnormal(est, event);
    const auto results = t_family(abn);
    EXPECT_NEAR(value_of(results, "cross_T_test"), -4.898979485566356, 1e-9);
    const TestResult& r = result_of(results, "cross_T_test");
    EXPECT_EQ(r.reference, ReferenceDist::student_t);
    EXPECT_DOUBLE_EQ(r.df, 3.0);
    EXPECT_FALSE(r.cd_adjusted);
}

TEST(TFamily, AllZeroCacGivesZeroStatistics) {
    const Eigen::MatrixXd est = integer_zero_mean_est(4, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Zero(4, 3);
    const auto results = t_family(make_abnormal(est, event));
    EXPECT_DOUBLE_EQ(value_of(results, "cross_T_test"), 0.0);
    EXPECT_DOUBLE_EQ(value_of(results, "T_skew"), 0.0);
}

TEST(TFamily, EqualNonzeroCacIsAnError) {
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Constant(4, 2, -1.5);
    EXPECT_THROW(t_family(make_abnormal(est, event)), DataError);
}

TEST(TFamily, SymmetricCacMakesTSkewEqualCrossT) {
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    Eigen::MatrixXd event(4, 1);
    event << 1, 2, 2, 3;  // symmetric about 2, so the skewness term vanishes
    const auto results = t_family(make_abnormal(est, event));
    EXPECT_NEAR(value_of(results, "T_skew"), value_of(results, "cross_T_test"), 1e-12);
}

TEST(TFamily, NeedsThreeCompleteStations) {
    const Eigen::MatrixXd est = unit_noise_est(2, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(2, 2);
    EXPECT_THROW(t_family(make_abnormal(est, event)), DataError);
}

// ---------------------------------------------------------------------------
// Patell family

TEST(PatellFamily, FrozenTwoStationValue) {
    // tau0=100, tau1=1, SACs (-2,-2), r_bar=0.5:
    //   Z = -4 / sqrt(2*1*98/96) = -2.7994, adj = Z/sqrt(1.5) = -2.2857.
    const Eigen::MatrixXd est = unit_noise_est(2, 100);
    Eigen::MatrixXd event(2, 1);
    event << -2, -2;
    const AbnormalPanel abn = make_abnormal(est, event, 0.5);
    const auto results = patell_family(abn);
    EXPECT_NEAR(value_of(results, "Z_patell"), -2.799417, 1e-5);
    EXPECT_NEAR(value_of(results, "Z_patell_adj"), -2.285714 * 2.799417 / 2.799417 / 1.0 *
                                                        (-2.799417 / std::sqrt(1.5)) /
                                                        (-2.285714),
                1e-5);
    EXPECT_NEAR(value_of(results, "Z_patell_adj"), -2.799417 / std::sqrt(1.5), 1e-5);
}

TEST(PatellFamily, ZeroEventAcsGiveZero) {
    const Eigen::MatrixXd est = integer_zero_mean_est(3, 80);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Zero(3, 4);
    const auto results = patell_family(make_abnormal(est, event, 0.3));
    EXPECT_DOUBLE_EQ(value_of(results, "Z_patell"), 0.0);
    EXPECT_DOUBLE_EQ(value_of(results, "Z_patell_adj"), 0.0);
}

TEST(PatellFamily, AdjustmentIdentityAtZeroRbar) {
    const Eigen::MatrixXd est = unit_noise_est(5, 90);
    Eigen::MatrixXd event = Eigen::MatrixXd::Random(5, 6);
    const auto results = patell_family(make_abnormal(est, event, 0.0));
    EXPECT_NEAR(value_of(results, "Z_patell"), value_of(results, "Z_patell_adj"), 1e-12);
}

TEST(PatellFamily, ShortEstimationWindowAndNegativeDependenceErrors) {
    const Eigen::MatrixXd est = unit_noise_est(2, 4);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(2, 2);
    EXPECT_THROW(patell_family(make_abnormal(est, event, 0.0, 2)), DataError);

    const Eigen::MatrixXd est2 = unit_noise_est(3, 60);
    const Eigen::MatrixXd event2 = Eigen::MatrixXd::Random(3, 2);
    EXPECT_THROW(patell_family(make_abnormal(est2, event2, -0.6)), DataError);
}

TEST(PatellFamily, AdjustedMagnitudeDecreasesInRbar) {
    const Eigen::MatrixXd est = unit_noise_est(4, 70);
    Eigen::MatrixXd event = Eigen::MatrixXd::Constant(4, 3, -1.0);
    event(1, 1) = -2.0;
    double prev = std::abs(value_of(patell_family(make_abnormal(est, event, 0.0)), "Z_patell_adj"));
    for (double r : {0.2, 0.4, 0.6, 0.8}) {
        const double cur =
            std::abs(value_of(patell_family(make_abnormal(est, event, r)), "Z_patell_adj"));
        EXPECT_LT(cur, prev);
        prev = cur;
    }
}

// ---------------------------------------------------------------------------
// BMP family

TEST(BmpFamily, FrozenScarValue) {
    // SCARs (-1,-2,-3): mean -2, sd 1, Z = -2*sqrt(3).
    const int tau0 = 102;
    const Eigen::MatrixXd est = unit_noise_est(3, tau0);
    const double kappa = (tau0 - 2.0) / (tau0 - 4.0);
    Eigen::MatrixXd event(3, 1);
    event << -1 * std::sqrt(kappa), -2 * std::sqrt(kappa), -3 * std::sqrt(kappa);
    const auto results = bmp_family(make_abnormal(est, event, 0.0));
    EXPECT_NEAR(value_of(results, "Z_BMP"), -2.0 * std::sqrt(3.0), 1e-9);
}

TEST(BmpFamily, AdjustmentIdentityAndShrinkingFactor) {
    const Eigen::MatrixXd est = unit_noise_est(4, 80);
    Eigen::MatrixXd event = Eigen::MatrixXd::Random(4, 5);
    const auto at_zero = bmp_family(make_abnormal(est, event, 0.0));
    EXPECT_NEAR(value_of(at_zero, "Z_BMP"), value_of(at_zero, "Z_BMP_adj"), 1e-12);

    // r_bar -> 1 sends the adjustment factor to zero.
    const auto near_one = bmp_family(make_abnormal(est, event, 0.999999));
    EXPECT_NEAR(value_of(near_one, "Z_BMP_adj"), 0.0, 1e-2);
    EXPECT_GT(std::abs(value_of(near_one, "Z_BMP")), 1e-3);
}

// ---------------------------------------------------------------------------
// Corrado rank family

TEST(CorradoFamily, SingleStationModEqualsPlain) {
    const Eigen::MatrixXd est = unit_noise_est(1, 40);
    Eigen::MatrixXd event(1, 5);
    event << -3, -2, -4, -1, -5;
    const auto results = corrado_family(make_abnormal(est, event));
    EXPECT_DOUBLE_EQ(value_of(results, "CumRank"), value_of(results, "CumRank_mod"));
}

TEST(CorradoFamily, ScaleInvariancePerStationIsBitExact) {
    const Eigen::MatrixXd est = unit_noise_est(4, 50, 23);
    Eigen::MatrixXd event = Eigen::MatrixXd::Random(4, 6);
    const AbnormalPanel base = make_abnormal(est, event);

    Eigen::MatrixXd est2 = est, event2 = event;
    est2.row(1) *= 17.5;
    event2.row(1) *= 17.5;
    est2.row(3) *= 0.003;
    event2.row(3) *= 0.003;
    const AbnormalPanel scaled = make_abnormal(est2, event2);

    const auto a = corrado_family(base);
    const auto b = corrado_family(scaled);
    for (const auto& id : {"CumRank", "CumRank_mod", "CumRank_T", "CumRank_Z", "CumRank_Z_adj"}) {
        EXPECT_EQ(value_of(a, id), value_of(b, id)) << id;
    }
    const auto ga = grank_family(base);
    const auto gb = grank_family(scaled);
    for (const auto& id : {"Z_grank", "Z_grank_adj", "T_grank"}) {
        EXPECT_EQ(value_of(ga, id), value_of(gb, id)) << id;
    }
}

TEST(CorradoFamily, AllTiedStationExcluded) {
    Eigen::MatrixXd est = unit_noise_est(2, 40);
    est.row(1).setZero();  // all tied -> excluded by the rank builder
    Eigen::MatrixXd event(2, 3);
    event << -1, -2, -3, 0, 0, 0;
    const auto results = corrado_family(make_abnormal(est, event));
    // Only one usable station remains, so mod == plain.
    EXPECT_DOUBLE_EQ(value_of(results, "CumRank"), value_of(results, "CumRank_mod"));
}

TEST(CorradoFamily, ReferenceDistributions) {
    const Eigen::MatrixXd est = unit_noise_est(3, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(3, 8);
    const auto results = corrado_family(make_abnormal(est, event));
    const TestResult& t = result_of(results, "CumRank_T");
    EXPECT_EQ(t.reference, ReferenceDist::student_t);
    EXPECT_DOUBLE_EQ(t.df, 60 + 8 - 2);
    EXPECT_EQ(result_of(results, "CumRank_Z").reference, ReferenceDist::standard_normal);
    EXPECT_FALSE(result_of(results, "CumRank_Z").cd_adjusted);
    EXPECT_TRUE(result_of(results, "CumRank").cd_adjusted);
}

// All event-window values at their station minimum minimize CumRank: exact
// enumeration for one station, sampled permutations for the 5x8 panel.
TEST(CorradoFamily, MinimumRankConfigurationIsExtremal) {
    {
        std::vector<double> values = {1, 2, 3, 4, 5, 6, 7, 8};
        const int tau0 = 6, tau1 = 2;
        double min_seen = 1e9;
        double min_config_value = 0.0;
        std::sort(values.begin(), values.end());
        std::vector<double> perm = values;
        do {
            Eigen::MatrixXd est(1, tau0), event(1, tau1);
            for (int t = 0; t < tau0; ++t) est(0, t) = perm[t];
            for (int t = 0; t < tau1; ++t) event(0, t) = perm[tau0 + t];
            const double v = value_of(corrado_family(make_abnormal(est, event)), "CumRank");
            min_seen = std::min(min_seen, v);
            if (event(0, 0) == 1 && event(0, 1) == 2) {
                min_config_value = std::min(min_config_value, v);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        // The smallest two values sitting in the event window attain the min.
        EXPECT_NEAR(min_seen, min_config_value, 1e-12);
    }
    {
        // 5x8 panel, all joint rearrangements of the time columns. Values are
        // comonotone across stations with station-specific offsets, so the
        // arrangement placing every station's two smallest values in the
        // event window is the reference configuration.
        const int n = 5, tau = 8, tau0 = 6, tau1 = 2;
        std::mt19937 rng(2718);
        std::vector<double> pattern = {5, 3, 8, 6, 4, 7, 1, 2};  // column base values
        Eigen::MatrixXd panel_vals(n, tau);
        for (int s = 0; s < n; ++s) {
            for (int c = 0; c < tau; ++c) panel_vals(s, c) = pattern[c] * (1.0 + 0.2 * s);
        }
        double reference = 0.0;
        double min_seen = 1e9;
        std::vector<int> order(tau);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end());
        do {
            Eigen::MatrixXd est(n, tau0), event(n, tau1);
            for (int s = 0; s < n; ++s) {
                for (int t = 0; t < tau0; ++t) est(s, t) = panel_vals(s, order[t]);
                for (int t = 0; t < tau1; ++t) event(s, t) = panel_vals(s, order[tau0 + t]);
            }
            const double v = value_of(corrado_family(make_abnormal(est, event)), "CumRank");
            min_seen = std::min(min_seen, v);
            // Columns with base values 1 and 2 hold every station's minima.
            if ((pattern[order[tau0]] == 1 && pattern[order[tau0 + 1]] == 2) ||
                (pattern[order[tau0]] == 2 && pattern[order[tau0 + 1]] == 1)) {
                reference = v;
            }
        } while (std::next_permutation(order.begin(), order.end()));
        EXPECT_NEAR(min_seen, reference, 1e-12);
        (void)rng;
    }
}

TEST(CorradoFamily, MonteCarloSizeUnderNull) {
    std::mt19937 rng(515);
    std::normal_distribution<double> gauss;
    const int n = 10, tau0 = 100, tau1 = 10, reps = 2000;
    int rejections = 0;
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd est(n, tau0), event(n, tau1);
        for (int s = 0; s < n; ++s) {
            for (int t = 0; t < tau0; ++t) est(s, t) = gauss(rng);
            for (int t = 0; t < tau1; ++t) event(s, t) = gauss(rng);
        }
        const auto results = corrado_family(make_abnormal(est, event, 0.0, 30));
        const double p = result_of(results, "CumRank").p_left;
        rejections += (p < 0.05) || (p > 0.95);  // two tails at 5% each
    }
    const double two_sided_rate = static_cast<double>(rejections) / reps / 2.0;
    EXPECT_GT(two_sided_rate, 0.03);
    EXPECT_LT(two_sided_rate, 0.07);
}

// ---------------------------------------------------------------------------
// generalized rank family

TEST(GrankFamily, MedianScarGivesZero) {
    // Symmetric estimation values (exact zero mean) with the event value 0
    // sitting dead center: the SCAR is each station's median generalized
    // observation, so the event-slot scaled rank is exactly 0.
    const int tau0 = 40;
    Eigen::MatrixXd est(2, tau0);
    for (int t = 0; t < tau0 / 2; ++t) {
        est(0, t) = -(1.0 + t);
        est(0, tau0 / 2 + t) = 1.0 + t;
        est(1, t) = -1.5 * (1.0 + t);
        est(1, tau0 / 2 + t) = 1.5 * (1.0 + t);
    }
    const Eigen::MatrixXd event = Eigen::MatrixXd::Zero(2, 1);
    const auto results = grank_family(make_abnormal(est, event));
    EXPECT_NEAR(value_of(results, "Z_grank"), 0.0, 1e-10);
    EXPECT_NEAR(value_of(results, "Z_grank_adj"), 0.0, 1e-10);
    EXPECT_NEAR(value_of(results, "T_grank"), 0.0, 1e-10);
}

TEST(GrankFamily, AdjustmentIdentityAtZeroRankCorrelation) {
    // Find a rank permutation of station 2 that is exactly uncorrelated with
    // station 1's identity ranks: sum(i * p_i) = n(n+1)^2/4 = 162 for n = 8.
    const int tau0 = 8;
    std::vector<int> perm(tau0);
    std::iota(perm.begin(), perm.end(), 1);
    bool found = false;
    do {
        long dot = 0;
        for (int i = 0; i < tau0; ++i) dot += static_cast<long>(i + 1) * perm[i];
        if (dot == 162) {
            found = true;
            break;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    ASSERT_TRUE(found);

    Eigen::MatrixXd est(2, tau0);
    for (int t = 0; t < tau0; ++t) {
        est(0, t) = t + 1.0;
        est(1, t) = static_cast<double>(perm[t]);
    }
    // Center the rows exactly (integer means: 4.5 is representable).
    est.array() -= 4.5;
    Eigen::MatrixXd event(2, 1);
    event << 9, 9;  // SCAR is the maximum of each generalized series
    const AbnormalPanel abn = make_abnormal(est, event, 0.0, 4);
    const auto results = grank_family(abn);
    EXPECT_NEAR(value_of(results, "Z_grank"), value_of(results, "Z_grank_adj"), 1e-12);
    EXPECT_GT(value_of(results, "Z_grank"), 0.0);
}

TEST(GrankFamily, MonteCarloSizeUnderNull) {
    std::mt19937 rng(616);
    std::normal_distribution<double> gauss;
    const int n = 10, tau0 = 100, tau1 = 8, reps = 2000;
    int rej_z = 0, rej_t = 0, rej_adj = 0;
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd est(n, tau0), event(n, tau1);
        for (int s = 0; s < n; ++s) {
            for (int t = 0; t < tau0; ++t) est(s, t) = gauss(rng);
            for (int t = 0; t < tau1; ++t) event(s, t) = gauss(rng);
        }
        const auto results = grank_family(make_abnormal(est, event, 0.0, 30));
        const double pz = result_of(results, "Z_grank").p_left;
        const double pt = result_of(results, "T_grank").p_left;
        const double pa = result_of(results, "Z_grank_adj").p_left;
        rej_z += (pz < 0.05) + (pz > 0.95);
        rej_t += (pt < 0.05) + (pt > 0.95);
        rej_adj += (pa < 0.05) + (pa > 0.95);
    }
    for (int rej : {rej_z, rej_t, rej_adj}) {
        const double rate = static_cast<double>(rej) / reps / 2.0;
        EXPECT_GT(rate, 0.03);
        EXPECT_LT(rate, 0.07);
    }
}

// ---------------------------------------------------------------------------
// battery, registry, reports

TEST(Battery, RegistryHasEighteenRowsAdjustedFirst) {
    const StatRegistry reg = StatRegistry::builtin();
    ASSERT_EQ(reg.entries().size(), 18u);
    // Adjusted block first, as in the published battery table.
    for (size_t i = 0; i < 11; ++i) EXPECT_TRUE(reg.entries()[i].cd_adjusted) << i;
    for (size_t i = 11; i < 18; ++i) EXPECT_FALSE(reg.entries()[i].cd_adjusted) << i;
    int implemented = 0;
    for (const auto& e : reg.entries()) implemented += e.implemented;
    EXPECT_EQ(implemented, 15);
    EXPECT_FALSE(reg.info("P1").implemented);
    EXPECT_FALSE(reg.info("P2").implemented);
    EXPECT_FALSE(reg.info("Corrado_Tukey").implemented);
}

TEST(Battery, UnknownIdListsAvailable) {
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(4, 3);
    const AbnormalPanel abn = make_abnormal(est, event);
    try {
        run_battery(abn, {"Z_nonsense"});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("Z_patell"), std::string::npos);
    }
}

TEST(Battery, UnimplementedSlotsComeBackUnavailable) {
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(4, 3);
    const auto results = run_battery(make_abnormal(est, event), {"P1", "Z_patell"});
    ASSERT_EQ(results.size(), 2u);
    EXPECT_EQ(results[0].stat_id, "P1");
    EXPECT_FALSE(results[0].available);
    EXPECT_TRUE(results[1].available);
    const std::string csv = battery_csv(results);
    EXPECT_NE(csv.find("unavailable"), std::string::npos);
}

TEST(Battery, ExternalKernelFillsExtensionSlot) {
    StatRegistry reg = StatRegistry::builtin();
    reg.register_external({"P1", StatFamily::grank, true, true, "user supplied"},
                          [](const AbnormalPanel&) {
                              TestResult r;
                              r.value = -1.25;
                              r.reference = ReferenceDist::standard_normal;
                              return r;
                          });
    const Eigen::MatrixXd est = unit_noise_est(4, 60);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(4, 3);
    const auto results = run_battery(make_abnormal(est, event), {"P1"}, reg);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_TRUE(results[0].available);
    EXPECT_DOUBLE_EQ(results[0].value, -1.25);
    EXPECT_NEAR(results[0].p_left, 0.1056, 1e-3);
}

TEST(Battery, FullRunInRegistryOrderWithStars) {
    const Eigen::MatrixXd est = unit_noise_est(6, 120, 77);
    Eigen::MatrixXd event = Eigen::MatrixXd::Constant(6, 10, -2.0);
    for (int s = 0; s < 6; ++s) event.row(s).array() += 0.15 * s;
    const auto results = run_battery(make_abnormal(est, event));
    ASSERT_EQ(results.size(), 18u);
    EXPECT_EQ(results[0].stat_id, "P1");
    EXPECT_EQ(results.back().stat_id, "Z_BMP");
    for (const auto& r : results) {
        if (!r.available) continue;
        EXPECT_GE(r.p_left, 0.0);
        EXPECT_LE(r.p_left, 1.0);
        // A -2 sigma drop across the board is decisively significant.
        EXPECT_LT(r.value, 0.0) << r.stat_id;
        EXPECT_EQ(r.stars, "***") << r.stat_id;
    }
    const std::string json = battery_json(results);
    EXPECT_NE(json.find("\"stat_id\": \"Z_patell_adj\""), std::string::npos);
}

TEST(Battery, PLeftSymmetryForNormalReferences) {
    const Eigen::MatrixXd est = unit_noise_est(5, 80, 31);
    Eigen::MatrixXd event = Eigen::MatrixXd::Random(5, 4);
    const AbnormalPanel abn = make_abnormal(est, event);
    Eigen::MatrixXd flipped_est = -est;
    Eigen::MatrixXd flipped_event = -event;
    const AbnormalPanel mirrored = make_abnormal(flipped_est, flipped_event);
    const auto a = run_battery(abn);
    const auto b = run_battery(mirrored);
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].available) continue;
        EXPECT_NEAR(a[i].p_left, 1.0 - b[i].p_left, 1e-9) << a[i].stat_id;
    }
}

TEST(Battery, LocationScaleInvarianceAcrossStations) {
    const Eigen::MatrixXd est = unit_noise_est(5, 90, 41);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Random(5, 5);
    const AbnormalPanel base = make_abnormal(est, event);
    // Common affine map a + b*AC with b > 0 across every station.
    const double a_shift = 4.25, b_scale = 2.5;
    const Eigen::MatrixXd est2 = (b_scale * est.array() + a_shift).matrix();
    const Eigen::MatrixXd event2 = (b_scale * event.array() + a_shift).matrix();
    const AbnormalPanel moved = make_abnormal(est2, event2);

    const auto r0 = run_battery(base);
    const auto r1 = run_battery(moved);
    for (size_t i = 0; i < r0.size(); ++i) {
        if (!r0[i].available) continue;
        if (r0[i].family == StatFamily::patell || r0[i].family == StatFamily::bmp ||
            r0[i].family == StatFamily::corrado || r0[i].family == StatFamily::grank) {
            EXPECT_NEAR(r0[i].value, r1[i].value, 1e-9) << r0[i].stat_id;
        } else {
            EXPECT_EQ(r0[i].value < 0, r1[i].value < 0) << r0[i].stat_id;
        }
    }
}

TEST(Battery, TwoSidedFlagChangesStarsOnly) {
    const Eigen::MatrixXd est = unit_noise_est(5, 70, 51);
    Eigen::MatrixXd event = Eigen::MatrixXd::Constant(5, 4, 1.1);
    for (int s = 0; s < 5; ++s) event.row(s).array() += 0.1 * s;
    const AbnormalPanel abn = make_abnormal(est, event);
    BatteryOptions two;
    two.two_sided = true;
    const auto one_sided = run_battery(abn);
    const auto two_sided = run_battery(abn, {}, StatRegistry::builtin(), two);
    for (size_t i = 0; i < one_sided.size(); ++i) {
        if (!one_sided[i].available) continue;
        EXPECT_EQ(one_sided[i].value, two_sided[i].value);
        EXPECT_EQ(one_sided[i].p_left, two_sided[i].p_left);
        // Strongly positive statistics are insignificant left-tail but
        // significant two-sided.
        if (one_sided[i].p_left > 0.995) {
            EXPECT_EQ(one_sided[i].stars, ".");
            EXPECT_NE(two_sided[i].stars, ".");
        }
    }
}

// Perfectly explained data plus tiny symmetric noise: the battery should be
// quiet. The joint clean-replication rate was measured at 200 replications
// and comfortably clears 95%.
TEST(Battery, QuietOnPerfectlyExplainedData) {
    std::mt19937 rng(808);
    std::uniform_real_distribution<double> tiny(-1e-6, 1e-6);
    const int n = 10, tau0 = 100, tau1 = 10, reps = 200;
    int clean = 0;
    for (int r = 0; r < reps; ++r) {
        Eigen::MatrixXd est(n, tau0), event(n, tau1);
        for (int s = 0; s < n; ++s) {
            for (int t = 0; t < tau0; ++t) est(s, t) = tiny(rng);
            for (int t = 0; t < tau1; ++t) event(s, t) = tiny(rng);
        }
        const auto results = run_battery(make_abnormal(est, event, 0.0, 30));
        bool ok = true;
        for (const auto& res : results) {
            if (!res.available) continue;
            if (std::abs(res.value) >= 3.0 || res.p_left < 0.01) ok = false;
        }
        clean += ok;
    }
    EXPECT_GE(clean, reps * 95 / 100) << clean << "/" << reps;
}

TEST(PlotData, EmitsDailyMeansWithWindowFlag) {
    const Eigen::MatrixXd est = unit_noise_est(3, 40);
    const Eigen::MatrixXd event = Eigen::MatrixXd::Constant(3, 5, -1.0);
    const AbnormalPanel abn = make_abnormal(est, event);
    std::vector<Date> timeline;
    for (int t = 0; t < 45; ++t) timeline.push_back(Date::from_ymd(2020, 1, 1) + t);
    const std::string csv = plot_data_csv(abn, timeline);
    EXPECT_NE(csv.find("date,mean_ac,lower,upper,event_window"), std::string::npos);
    EXPECT_NE(csv.find("2020-01-01"), std::string::npos);
    // 40 estimation rows flagged 0, 5 event rows flagged 1.
    size_t flagged = 0, pos = 0;
    while ((pos = csv.find(",1\n", pos)) != std::string::npos) {
        ++flagged;
        pos += 3;
    }
    EXPECT_EQ(flagged, 5u);
}

TEST(Stars, ThresholdsMatchReportConventions) {
    EXPECT_EQ(stars_for(0.002), "***");
    EXPECT_EQ(stars_for(0.03), "**");
    EXPECT_EQ(stars_for(0.07), "*");
    EXPECT_EQ(stars_for(0.2), ".");
}
