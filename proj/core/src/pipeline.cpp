#include "stes/pipeline.hpp"

#include <limits>

#include "stes/errors.hpp"

namespace stes {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::hdgm: return "hdgm";
        case ModelKind::lm: return "lm";
        case ModelKind::regar1: return "regar1";
        case ModelKind::regarma: return "regarma";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "hdgm") return ModelKind::hdgm;
    if (name == "lm") return ModelKind::lm;
    if (name == "regar1") return ModelKind::regar1;
    if (name == "regarma") return ModelKind::regarma;
    throw ConfigError("unknown model '" + name + "' (expected hdgm, lm, regar1 or regarma)");
}

NormalModelResult fit_normal_model(const Panel& panel, const WindowSplit& split, ModelKind kind,
                                   const NormalModelOptions& options) {
    NormalModelResult result;
    result.kind = kind;
    if (kind == ModelKind::hdgm) {
        HdgmParams init = hdgm_default_init(panel, split, options.matern_smoothness);
        HdgmFitResult fit = em_fit(panel, split, init, options.hdgm_options);
        result.normal_values = Eigen::MatrixXd::Constant(panel.n_stations(), panel.n_times(),
                                                         std::numeric_limits<double>::quiet_NaN());
        Eigen::MatrixXd in_sample(panel.n_stations(), split.tau0());
        for (int t = 0; t < split.tau0(); ++t) {
            in_sample.col(t) =
                panel.design_at_time(split.t0 + t) * fit.params.beta + fit.smoothed_states.col(t);
        }
        result.normal_values.middleCols(split.t0, split.tau0()) = in_sample;
        if (split.tau1() > 0) {
            result.normal_values.middleCols(split.t1 + 1, split.tau1()) =
                forecast_normal(panel, split, fit.params);
        }
        result.warnings = fit.warnings;
        result.hdgm = std::move(fit);
        return result;
    }

    BaselineKind bk = BaselineKind::lm;
    if (kind == ModelKind::regar1) bk = BaselineKind::regar1;
    if (kind == ModelKind::regarma) bk = BaselineKind::regarma;
    PanelBaselineResult fit = fit_baseline_panel(panel, split, bk, options.threads);
    result.normal_values = std::move(fit.normal_values);
    result.baseline_fits = std::move(fit.fits);
    result.warnings = std::move(fit.warnings);
    return result;
}

}  // namespace stes
