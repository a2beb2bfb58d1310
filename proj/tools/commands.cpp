#include "commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stes/csv.hpp"
#include "stes/date.hpp"
#include "stes/diagnostics.hpp"
#include "stes/errors.hpp"
#include "stes/eventstudy.hpp"
#include "stes/hdgm.hpp"
#include "stes/panel.hpp"
#include "stes/pipeline.hpp"
#include "stes/simgen.hpp"

namespace fs = std::filesystem;

namespace stes::cli {

namespace {

// ---- logging ---------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel g_log_level = LogLevel::info;
std::mutex g_log_mutex;

void log(LogLevel level, const std::string& msg) {
    if (level > g_log_level) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::scoped_lock lock(g_log_mutex);
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

LogLevel log_level_from_string(const std::string& name) {
    if (name == "error") return LogLevel::error;
    if (name == "warn") return LogLevel::warn;
    if (name == "info") return LogLevel::info;
    if (name == "debug") return LogLevel::debug;
    throw ConfigError("unknown log level '" + name + "'");
}

// ---- run configuration -----------------------------------------------------

struct RunConfig {
    fs::path stations;
    fs::path observations;
    fs::path covariates;  // optional
    std::vector<std::string> scenarios;  // event dates, ISO strings
    std::vector<ModelKind> models = {ModelKind::hdgm, ModelKind::lm, ModelKind::regar1,
                                     ModelKind::regarma};
    std::vector<std::string> statistics;  // empty = all
    std::vector<std::string> lag_bases;
    std::vector<int> lag_days;
    fs::path out = "out";
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency
    HdgmFitOptions hdgm_options;
    double matern_smoothness = 0.5;
    DiagnosticsOptions diagnostics_options;
    AbnormalOptions abnormal_options;
    bool two_sided = false;
    bool reuse_fits = false;

    nlohmann::json effective;  // the resolved config, copied into the output dir

    int effective_threads() const {
        if (threads > 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
};

std::vector<ModelKind> parse_models(const nlohmann::json& j) {
    std::vector<ModelKind> out;
    if (j.is_string()) {
        if (j.get<std::string>() == "all") {
            return {ModelKind::hdgm, ModelKind::lm, ModelKind::regar1, ModelKind::regarma};
        }
        out.push_back(model_kind_from_string(j.get<std::string>()));
        return out;
    }
    for (const auto& name : j) out.push_back(model_kind_from_string(name.get<std::string>()));
    if (out.empty()) throw ConfigError("empty model list");
    return out;
}

RunConfig load_run_config(const fs::path& config_path) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config '" + config_path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config '" + config_path.string() + "': " + e.what());
    }

    RunConfig cfg;
    try {
        const auto& data = j.at("data");
        cfg.stations = data.at("stations").get<std::string>();
        cfg.observations = data.at("observations").get<std::string>();
        cfg.covariates = data.value("covariates", std::string());

        if (j.contains("scenarios")) {
            cfg.scenarios = j.at("scenarios").get<std::vector<std::string>>();
        }
        if (j.contains("event_date")) {
            const std::string main_date = j.at("event_date").get<std::string>();
            if (std::find(cfg.scenarios.begin(), cfg.scenarios.end(), main_date) ==
                cfg.scenarios.end()) {
                cfg.scenarios.insert(cfg.scenarios.begin(), main_date);
            }
        }
        if (cfg.scenarios.empty()) {
            throw ConfigError("config needs 'event_date' or a non-empty 'scenarios' list");
        }
        for (const auto& s : cfg.scenarios) Date::parse(s);

        if (j.contains("models")) cfg.models = parse_models(j.at("models"));
        cfg.statistics = j.value("statistics", std::vector<std::string>{});
        if (j.contains("lags")) {
            cfg.lag_bases = j.at("lags").value("bases", std::vector<std::string>{});
            cfg.lag_days = j.at("lags").value("days", std::vector<int>{});
        }
        cfg.out = j.value("out", std::string("out"));
        cfg.seed = j.value("seed", 0ULL);
        cfg.threads = j.value("threads", 0);

        const nlohmann::json options = j.value("options", nlohmann::json::object());
        cfg.hdgm_options.tol = options.value("em_tol", 1e-6);
        cfg.hdgm_options.max_iter = options.value("em_max_iter", 400);
        cfg.matern_smoothness = options.value("matern_smoothness", 0.5);
        cfg.diagnostics_options.hampel_half_window = options.value("hampel_half_window", 10);
        cfg.diagnostics_options.hampel_threshold = options.value("hampel_threshold", 3.0);
        cfg.abnormal_options.min_estimation_points = options.value("min_estimation_points", 30);
        cfg.two_sided = options.value("two_sided", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config '" + config_path.string() + "': " + e.what());
    }
    cfg.effective = j;
    return cfg;
}

void copy_config_to_out(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    nlohmann::json j = cfg.effective;
    j["out"] = cfg.out.string();
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    write_file_atomic(cfg.out / "effective-config.json", j.dump(2));
}

Panel load_panel(const RunConfig& cfg) {
    log(LogLevel::info, "ingesting panel from " + cfg.observations.string());
    Panel panel = ingest_csv(cfg.stations, cfg.observations, cfg.covariates);
    if (!cfg.lag_bases.empty() && !cfg.lag_days.empty()) {
        log(LogLevel::info, "adding lagged covariates");
        panel = add_lagged_covariates(panel, cfg.lag_bases, cfg.lag_days);
    }
    return panel;
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
    }
    return out;
}

// ---- per-scenario fitting --------------------------------------------------

struct ScenarioFit {
    std::string scenario;
    WindowSplit split;
    std::map<ModelKind, NormalModelResult> fits;
};

void write_fit_artifacts(const RunConfig& cfg, const ScenarioFit& sf) {
    const fs::path fits_dir = cfg.out / "fits";
    for (const auto& [kind, fit] : sf.fits) {
        const std::string base = to_string(kind) + "_" + sanitize(sf.scenario);
        if (kind == ModelKind::hdgm) {
            write_file_atomic(fits_dir / (base + ".json"), hdgm_fit_to_json(*fit.hdgm));
        } else {
            write_file_atomic(fits_dir / (base + ".csv"), baseline_summary_csv(fit.baseline_fits));
        }
        for (const auto& w : fit.warnings) {
            log(LogLevel::warn, to_string(kind) + " " + sf.scenario + ": " + w);
        }
    }
}

ScenarioFit fit_scenario(const RunConfig& cfg, const Panel& panel, const std::string& scenario,
                         int threads) {
    ScenarioFit sf;
    sf.scenario = scenario;
    sf.split = split_windows(panel, Date::parse(scenario));
    for (ModelKind kind : cfg.models) {
        NormalModelOptions options;
        options.hdgm_options = cfg.hdgm_options;
        options.matern_smoothness = cfg.matern_smoothness;
        options.threads = threads;

        if (kind == ModelKind::hdgm && cfg.reuse_fits) {
            const fs::path file =
                cfg.out / "fits" / ("hdgm_" + sanitize(scenario) + ".json");
            std::ifstream in(file);
            if (!in) {
                throw DataError("no stored HDGM fit at '" + file.string() +
                                "'; run the fit command first or drop --reuse-fits");
            }
            std::stringstream buf;
            buf << in.rdbuf();
            const HdgmFitResult stored = hdgm_fit_from_json(buf.str());
            log(LogLevel::info, scenario + ": reusing stored HDGM parameters");
            NormalModelResult res;
            res.kind = ModelKind::hdgm;
            res.normal_values =
                Eigen::MatrixXd::Constant(panel.n_stations(), panel.n_times(),
                                          std::numeric_limits<double>::quiet_NaN());
            res.normal_values.middleCols(sf.split.t0, sf.split.tau0()) =
                hdgm_insample_normal(panel, sf.split, stored.params);
            if (sf.split.tau1() > 0) {
                res.normal_values.middleCols(sf.split.t1 + 1, sf.split.tau1()) =
                    forecast_normal(panel, sf.split, stored.params);
            }
            res.hdgm = stored;
            sf.fits.emplace(kind, std::move(res));
            continue;
        }
        log(LogLevel::info, scenario + ": fitting " + to_string(kind));
        try {
            sf.fits.emplace(kind, fit_normal_model(panel, sf.split, kind, options));
        } catch (const Error& e) {
            throw Error(e.code(), to_string(kind) + " on scenario " + scenario + ": " + e.what());
        }
    }
    return sf;
}

std::vector<ScenarioFit> fit_all_scenarios(const RunConfig& cfg, const Panel& panel) {
    const int total = static_cast<int>(cfg.scenarios.size());
    std::vector<ScenarioFit> fits(total);
    const int threads = cfg.effective_threads();
    if (total == 1 || threads <= 1) {
        for (int i = 0; i < total; ++i) {
            fits[i] = fit_scenario(cfg, panel, cfg.scenarios[i], threads);
        }
        return fits;
    }
    // Scenarios run concurrently; station-level parallelism stays inside.
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::string first_error;
    const int outer = std::min(threads, total);
    const int inner = std::max(1, threads / outer);
    for (int i = 0; i < outer; ++i) {
        pool.emplace_back([&] {
            for (int idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1)) {
                try {
                    fits[idx] = fit_scenario(cfg, panel, cfg.scenarios[idx], inner);
                } catch (const std::exception& e) {
                    std::scoped_lock lock(err_mutex);
                    if (first_error.empty()) {
                        first_error = cfg.scenarios[idx] + ": " + e.what();
                    }
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (!first_error.empty()) throw DataError(first_error);
    return fits;
}

// ---- subcommands -----------------------------------------------------------

int cmd_ingest_check(const RunConfig& cfg) {
    const Panel panel = load_panel(cfg);
    std::ostringstream out;
    out << "stations: " << panel.n_stations() << "\n"
        << "time points: " << panel.n_times() << " (" << panel.timeline().front().to_string()
        << " .. " << panel.timeline().back().to_string() << ")\n"
        << "covariates: " << panel.n_covariates() << "\n"
        << "first usable index: " << panel.first_usable() << "\n";
    long missing = 0;
    for (int s = 0; s < panel.n_stations(); ++s) {
        for (int t = 0; t < panel.n_times(); ++t) {
            missing += std::isnan(panel.observations()(s, t));
        }
    }
    out << "missing observations: " << missing << " ("
        << 100.0 * missing / (static_cast<double>(panel.n_stations()) * panel.n_times())
        << "%)\n";
    if (panel.n_stations() >= 2) {
        const CorrelationSummary cs = mean_pairwise_correlation(panel.observations());
        out << "pairwise correlation: mean " << cs.mean << ", min " << cs.min << ", q25 "
            << cs.q25 << ", median " << cs.median << ", q75 " << cs.q75 << ", max " << cs.max
            << " (" << cs.used_pairs << " pairs, " << cs.dropped_pairs << " dropped)\n";
    }
    for (const auto& s : cfg.scenarios) {
        const WindowSplit split = split_windows(panel, Date::parse(s));
        out << "scenario " << s << ": tau0 " << split.tau0() << ", tau1 " << split.tau1() << "\n";
    }
    std::cout << out.str();
    return 0;
}

int cmd_fit(const RunConfig& cfg) {
    copy_config_to_out(cfg);
    const Panel panel = load_panel(cfg);
    const std::vector<ScenarioFit> fits = fit_all_scenarios(cfg, panel);
    for (const auto& sf : fits) write_fit_artifacts(cfg, sf);
    log(LogLevel::info, "fit artifacts written to " + (cfg.out / "fits").string());
    return 0;
}

int cmd_evstudy(const RunConfig& cfg) {
    copy_config_to_out(cfg);
    const Panel panel = load_panel(cfg);
    const std::vector<ScenarioFit> fits = fit_all_scenarios(cfg, panel);
    const StatRegistry registry = StatRegistry::builtin();
    BatteryOptions battery_options;
    battery_options.two_sided = cfg.two_sided;

    // stat -> scenario -> model -> value, for the cross-scenario summary
    std::map<std::string, std::map<std::string, std::map<std::string, double>>> values;

    for (const auto& sf : fits) {
        write_fit_artifacts(cfg, sf);
        const fs::path dir = cfg.out / sanitize(sf.scenario);
        std::vector<std::pair<std::string, DiagnosticsRow>> diag_columns;
        for (const auto& [kind, fit] : sf.fits) {
            const AbnormalPanel abn =
                compute_abnormal(panel, fit.normal_values, sf.split, cfg.abnormal_options);
            for (const auto& w : abn.warnings) {
                log(LogLevel::warn, sf.scenario + " " + to_string(kind) + ": " + w);
            }
            const std::vector<TestResult> results =
                run_battery(abn, cfg.statistics, registry, battery_options);
            const std::string model = to_string(kind);
            write_file_atomic(dir / ("battery_" + model + ".csv"), battery_csv(results));
            write_file_atomic(dir / ("battery_" + model + ".json"), battery_json(results));
            write_file_atomic(dir / ("plotdata_" + model + ".csv"),
                              plot_data_csv(abn, panel.timeline()));
            diag_columns.emplace_back(model, diagnostics_row(abn, cfg.diagnostics_options));
            for (const auto& r : results) {
                if (r.available) values[r.stat_id][sf.scenario][model] = r.value;
            }
        }
        write_file_atomic(dir / "diagnostics.csv", diagnostics_table_csv(diag_columns));
        log(LogLevel::info, "scenario " + sf.scenario + " written to " + dir.string());
    }

    if (fits.size() > 1) {
        std::string out = csv_line({"stat_id", "model", "scenario", "value", "sign_consistent"});
        for (const auto& [stat, by_scenario] : values) {
            std::map<std::string, std::vector<std::pair<std::string, double>>> by_model;
            for (const auto& [scenario, models] : by_scenario) {
                for (const auto& [model, value] : models) {
                    by_model[model].emplace_back(scenario, value);
                }
            }
            for (const auto& [model, rows] : by_model) {
                bool pos = true, neg = true;
                for (const auto& [scenario, value] : rows) {
                    pos = pos && value > 0;
                    neg = neg && value < 0;
                }
                const std::string consistent = (pos || neg) ? "1" : "0";
                for (const auto& [scenario, value] : rows) {
                    std::ostringstream v;
                    v.precision(10);
                    v << value;
                    out += csv_line({stat, model, scenario, v.str(), consistent});
                }
            }
        }
        write_file_atomic(cfg.out / "scenario_comparison.csv", out);
    }
    return 0;
}

int cmd_diagnostics(const RunConfig& cfg) {
    copy_config_to_out(cfg);
    const Panel panel = load_panel(cfg);
    const std::vector<ScenarioFit> fits = fit_all_scenarios(cfg, panel);
    for (const auto& sf : fits) {
        std::vector<std::pair<std::string, DiagnosticsRow>> columns;
        for (const auto& [kind, fit] : sf.fits) {
            const AbnormalPanel abn =
                compute_abnormal(panel, fit.normal_values, sf.split, cfg.abnormal_options);
            columns.emplace_back(to_string(kind), diagnostics_row(abn, cfg.diagnostics_options));
        }
        write_file_atomic(cfg.out / sanitize(sf.scenario) / "diagnostics.csv",
                          diagnostics_table_csv(columns));
    }
    return 0;
}

int cmd_mc(const fs::path& config_path, const fs::path& out_override,
           std::optional<std::uint64_t> seed_override, int threads_override) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open Monte Carlo config '" + config_path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();

    std::vector<McCell> grid;
    McOptions options;
    parse_mc_config(buf.str(), grid, options);
    if (seed_override) options.seed = *seed_override;
    if (threads_override > 0) {
        options.threads = threads_override;
    } else if (options.threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        options.threads = hw == 0 ? 1 : static_cast<int>(hw);
    }

    nlohmann::json effective = nlohmann::json::parse(buf.str());
    effective["seed"] = options.seed;
    effective["threads"] = options.threads;
    const fs::path out = out_override.empty() ? fs::path("out") : out_override;
    std::error_code ec;
    fs::create_directories(out, ec);
    write_file_atomic(out / "effective-config.json", effective.dump(2));

    log(LogLevel::info, "running " + std::to_string(grid.size()) + " grid cells x " +
                            std::to_string(options.models.size()) + " models, R=" +
                            std::to_string(options.replications));
    options.on_cell_done = [](const McCellReport& cell) {
        log(LogLevel::info, "cell '" + cell.label + "' (" + cell.model + ") done, failures " +
                                std::to_string(cell.failures));
    };
    const McReport report = run_monte_carlo(grid, options);
    write_file_atomic(out / "mc_report.csv", mc_report_csv(report));
    write_file_atomic(out / "mc_report.json", mc_report_json(report));
    for (const auto& cell : report.cells) {
        if (!cell.valid) {
            log(LogLevel::warn, "cell '" + cell.label + "' (" + cell.model + ") had " +
                                    std::to_string(cell.failures) + " failures and is flagged invalid");
        }
    }
    log(LogLevel::info, "Monte Carlo report written to " + out.string());
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Event studies for spatially correlated panel time series"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string log_level = "info";
    std::int64_t seed_override = -1;
    int threads_override = 0;
    app.add_option("--config", config_path, "JSON run configuration")->required(false);
    app.add_option("--out", out_override, "output directory (overrides the config)");
    app.add_option("--seed", seed_override, "root RNG seed (overrides the config)");
    app.add_option("--threads", threads_override, "worker threads (0 = hardware)");
    app.add_option("--log-level", log_level, "error, warn, info or debug");

    auto* ingest = app.add_subcommand("ingest-check", "validate input CSVs and print a summary");
    auto* fit = app.add_subcommand("fit", "fit normal-value models and store artifacts");
    auto* evstudy =
        app.add_subcommand("evstudy", "abnormal values, statistic battery, diagnostics, plot data");
    bool reuse_fits = false;
    evstudy->add_flag("--reuse-fits", reuse_fits, "reuse stored HDGM fit artifacts");
    auto* diagnostics = app.add_subcommand("diagnostics", "abnormal-value diagnostics table only");
    auto* mc = app.add_subcommand("mc", "Monte Carlo size/power harness");

    try {
        app.parse(argc, argv);
        g_log_level = log_level_from_string(log_level);

        if (mc->parsed()) {
            if (config_path.empty()) throw ConfigError("mc needs --config pointing to a grid file");
            return cmd_mc(config_path, out_override,
                          seed_override >= 0
                              ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(seed_override))
                              : std::nullopt,
                          threads_override);
        }

        if (config_path.empty()) throw ConfigError("--config is required");
        RunConfig cfg = load_run_config(config_path);
        if (!out_override.empty()) cfg.out = out_override;
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        if (threads_override > 0) cfg.threads = threads_override;
        cfg.reuse_fits = reuse_fits;

        if (ingest->parsed()) return cmd_ingest_check(cfg);
        if (fit->parsed()) return cmd_fit(cfg);
        if (evstudy->parsed()) return cmd_evstudy(cfg);
        if (diagnostics->parsed()) return cmd_diagnostics(cfg);
        throw ConfigError("no subcommand selected");
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        log(LogLevel::error, e.what());
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        log(LogLevel::error, e.what());
        return 1;
    }
}

}  // namespace stes::cli
