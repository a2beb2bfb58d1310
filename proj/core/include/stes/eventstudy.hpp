#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stes/panel.hpp"

namespace stes {

/// Abnormal values AC = observed - normal over estimation + event windows,
/// with the per-station cumulated event-window sums and the ingredients the
/// statistic battery reads.
struct AbnormalPanel {
    Eigen::MatrixXd ac;        ///< N x tau, NaN where missing or outside the windows
    Eigen::VectorXd cac;       ///< per station, NaN for excluded stations
    WindowSplit split;
    Eigen::VectorXd sigma_hat; ///< estimation-window AC standard deviation per station
    Eigen::VectorXd mean_hat;  ///< estimation-window AC mean (centers the parametric kernels)
    double r_bar = 0.0;        ///< mean pairwise Pearson correlation of estimation ACs
    std::vector<int> included; ///< panel station indexes that passed the data checks
    std::vector<std::string> station_ids;
    std::vector<std::string> warnings;
    int min_rank_points = 30;  ///< per-station point floor for the rank statistics
};

struct AbnormalOptions {
    int min_estimation_points = 30;  ///< stations below this are excluded
    int sigma_dof_adjust = 0;        ///< denominator tau0 - d for sigma_hat
    int min_rank_points = 30;        ///< forwarded to the rank statistics
};

/// Builds the abnormal panel from normal values aligned with the panel
/// (N x tau; cells outside the windows may be anything, NaN included).
AbnormalPanel compute_abnormal(const Panel& panel, const Eigen::MatrixXd& normal_values,
                               const WindowSplit& split, const AbnormalOptions& options = {});

enum class StatFamily { t_family, patell, bmp, corrado, grank };
enum class ReferenceDist { standard_normal, student_t };

std::string to_string(StatFamily family);

struct TestResult {
    std::string stat_id;
    double value = 0.0;
    double p_left = 1.0;
    bool cd_adjusted = false;
    StatFamily family = StatFamily::t_family;
    ReferenceDist reference = ReferenceDist::standard_normal;
    double df = 0.0;  ///< meaningful for student_t references
    std::string stars;
    bool available = true;  ///< false for registry extension slots without a kernel
};

/// Significance stars at 1% / 5% / 10%, "." otherwise.
std::string stars_for(double p_left);

/// Cross-sectional t statistics on CAC: cross_T_test, crude_dep_T_test, T_skew.
std::vector<TestResult> t_family(const AbnormalPanel& abn);

/// Standardized-residual statistics: Z_patell, Z_patell_adj.
std::vector<TestResult> patell_family(const AbnormalPanel& abn);

/// Cross-sectionally restandardized statistics: Z_BMP, Z_BMP_adj.
std::vector<TestResult> bmp_family(const AbnormalPanel& abn);

/// Rank statistics over both windows: CumRank, CumRank_mod, CumRank_T,
/// CumRank_Z, CumRank_Z_adj.
std::vector<TestResult> corrado_family(const AbnormalPanel& abn);

/// Generalized rank statistics: Z_grank, Z_grank_adj, T_grank.
std::vector<TestResult> grank_family(const AbnormalPanel& abn);

/// One registry row: identity, family, adjustment flag and source note.
struct StatInfo {
    std::string id;
    StatFamily family = StatFamily::t_family;
    bool cd_adjusted = false;
    bool implemented = true;
    std::string source;  ///< literature reference and formula note
};

using StatKernel = std::function<TestResult(const AbnormalPanel&)>;

/// The battery registry: the built-in table rows in report order
/// (adjusted block first), plus user extension slots. P1, P2 and
/// Corrado_Tukey ship as reserved, unimplemented slots.
class StatRegistry {
public:
    static StatRegistry builtin();

    const std::vector<StatInfo>& entries() const { return entries_; }
    bool contains(const std::string& id) const;
    const StatInfo& info(const std::string& id) const;  ///< throws ConfigError when unknown

    /// Fills a reserved slot (or adds a new row) with a user kernel.
    void register_external(const StatInfo& info, StatKernel kernel);
    const StatKernel* external_kernel(const std::string& id) const;

    std::vector<std::string> all_ids() const;

private:
    std::vector<StatInfo> entries_;
    std::map<std::string, StatKernel> external_;
};

struct BatteryOptions {
    bool two_sided = false;  ///< stars from min(p, 1-p)*2 instead of the left tail
};

/// Evaluates the requested statistics (empty list = every registry row) and
/// returns them in registry order. Unknown ids raise ConfigError listing the
/// available ids; known-but-unimplemented rows come back flagged unavailable.
std::vector<TestResult> run_battery(const AbnormalPanel& abn,
                                    const std::vector<std::string>& stat_ids = {},
                                    const StatRegistry& registry = StatRegistry::builtin(),
                                    const BatteryOptions& options = {});

/// Report serialization: stat_id, family, cd_adjusted, value, p_left, stars.
std::string battery_csv(const std::vector<TestResult>& results);
std::string battery_json(const std::vector<TestResult>& results);

/// Per-day cross-station mean AC with a normal-approximation band and the
/// event-window flag; reproduces the abnormal-series plot as plain CSV.
std::string plot_data_csv(const AbnormalPanel& abn, const std::vector<Date>& timeline);

}  // namespace stes
