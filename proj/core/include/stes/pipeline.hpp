#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "stes/baselines.hpp"
#include "stes/hdgm.hpp"
#include "stes/panel.hpp"

namespace stes {

/// Normal-value model selector: the pooled spatio-temporal model or one of
/// the per-station temporal baselines.
enum class ModelKind { hdgm, lm, regar1, regarma };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct NormalModelOptions {
    HdgmFitOptions hdgm_options;
    double matern_smoothness = 0.5;
    int threads = 1;
};

/// A fitted normal-value model with its N x tau surface of normal values
/// (estimation window in-sample, event window forecast, NaN elsewhere).
struct NormalModelResult {
    ModelKind kind = ModelKind::lm;
    Eigen::MatrixXd normal_values;
    std::optional<HdgmFitResult> hdgm;
    std::vector<BaselineFit> baseline_fits;
    std::vector<std::string> warnings;
};

/// Fits the chosen model on the estimation window and forecasts the event
/// window without re-estimation.
NormalModelResult fit_normal_model(const Panel& panel, const WindowSplit& split, ModelKind kind,
                                   const NormalModelOptions& options = {});

}  // namespace stes
