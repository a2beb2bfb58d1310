#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stes/date.hpp"
#include "stes/hdgm.hpp"
#include "stes/panel.hpp"
#include "stes/pipeline.hpp"

namespace stes {

/// Deterministic stream split: one root seed, per-replication streams by
/// counter so any replication is reproducible in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter);

/// Configuration of one synthetic panel drawn from the spatio-temporal
/// process, with an optional additive level shift over the event window.
struct SimConfig {
    int n_stations = 10;
    int tau0 = 200;
    int tau1 = 20;
    HdgmParams params;  ///< ground truth; beta sized intercept + n_covariates
    double layout_side_km = 100.0;
    std::optional<std::vector<std::pair<double, double>>> coordinates;
    int n_covariates = 2;  ///< standard-normal covariates beside the intercept
    double shift = 0.0;    ///< level change over the event window, in marginal sd units
    std::uint64_t seed = 0;
    Date start_date = Date::from_ymd(2000, 1, 1);

    void validate() const;
};

struct SimulatedPanel {
    Panel panel;
    WindowSplit split;
    Eigen::MatrixXd latent;  ///< N x tau simulated random-effect field
    HdgmParams truth;
};

/// Forward simulation: Y = X beta + w + eps with w the stationary AR(1)
/// Matern field; identical configs (seed included) give identical panels.
SimulatedPanel simulate_panel(const SimConfig& config);

/// One Monte Carlo grid cell: a scenario label plus its panel generator.
struct McCell {
    std::string label;
    SimConfig config;
};

struct McOptions {
    int replications = 1000;
    std::vector<ModelKind> models = {ModelKind::lm};
    std::vector<std::string> statistics;  ///< empty = all implemented
    std::vector<double> alphas = {0.01, 0.05, 0.10};
    std::uint64_t seed = 0;
    int threads = 1;
    double max_failure_share = 0.10;
    /// Called after each grid cell x model completes (progress reporting).
    std::function<void(const struct McCellReport&)> on_cell_done;
};

struct McStatRates {
    std::string stat_id;
    std::map<double, double> rejection_rate;  ///< per alpha
    std::map<double, double> mc_se;           ///< sqrt(p(1-p)/R)
};

struct McCellReport {
    std::string label;
    std::string model;
    int replications = 0;
    int failures = 0;
    bool valid = true;  ///< false when failures exceed the allowed share
    double shift = 0.0;
    std::vector<McStatRates> stats;

    const McStatRates& stat(const std::string& id) const;  ///< throws ConfigError
};

struct McReport {
    std::vector<McCellReport> cells;
};

/// Simulate -> fit normal-value model -> abnormal calculus -> battery ->
/// tally rejections, per grid cell and model. Replication r of any cell uses
/// the stream derive_seed(cell seed, r) regardless of thread count.
McReport run_monte_carlo(const std::vector<McCell>& grid, const McOptions& options);

std::string mc_report_csv(const McReport& report);
std::string mc_report_json(const McReport& report);

/// Declarative config: {"seed":..., "replications":..., "models":[...],
/// "statistics":[...], "alphas":[...], "grid":[{label, n_stations, tau0,
/// tau1, g, nu, theta, sigma2_eps, beta, n_covariates, layout_side_km,
/// shift, smoothness?}, ...]}. Throws ConfigError on malformed input.
void parse_mc_config(const std::string& json_text, std::vector<McCell>& grid, McOptions& options);

}  // namespace stes
