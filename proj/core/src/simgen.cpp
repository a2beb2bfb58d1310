#include "stes/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stes/csv.hpp"
#include "stes/errors.hpp"
#include "stes/eventstudy.hpp"

namespace stes {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd aj = a;
        aj.diagonal().array() += 1e-10 * a.diagonal().maxCoeff();
        llt.compute(aj);
        if (llt.info() != Eigen::Success) {
            throw NumericError(std::string(what) + ": Cholesky failed");
        }
    }
    return llt.matrixL();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
    return splitmix64(root ^ splitmix64(counter + 1));
}

void SimConfig::validate() const {
    if (n_stations < 1) throw ConfigError("n_stations must be >= 1");
    if (tau0 < 3) throw ConfigError("tau0 must be >= 3");
    if (tau1 < 1) throw ConfigError("tau1 must be >= 1");
    if (n_covariates < 0) throw ConfigError("n_covariates must be >= 0");
    if (!std::isfinite(shift)) throw ConfigError("shift must be finite");
    params.validate();
    if (params.beta.size() != n_covariates + 1) {
        throw ConfigError("beta must have n_covariates + 1 entries (intercept first)");
    }
    if (coordinates && static_cast<int>(coordinates->size()) != n_stations) {
        throw ConfigError("explicit coordinates must match n_stations");
    }
    if (!coordinates && !(layout_side_km > 0.0)) {
        throw ConfigError("layout_side_km must be positive");
    }
}

SimulatedPanel simulate_panel(const SimConfig& config) {
    config.validate();
    const int n = config.n_stations;
    const int tau = config.tau0 + config.tau1;

    std::mt19937_64 rng(derive_seed(config.seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, config.layout_side_km);

    std::vector<Station> stations(n);
    for (int s = 0; s < n; ++s) {
        stations[s].id = "S" + std::to_string(s + 1);
        if (config.coordinates) {
            stations[s].x = (*config.coordinates)[s].first;
            stations[s].y = (*config.coordinates)[s].second;
        } else {
            stations[s].x = unif(rng);
            stations[s].y = unif(rng);
        }
    }

    std::vector<Date> timeline(tau);
    for (int t = 0; t < tau; ++t) timeline[t] = config.start_date + t;

    std::vector<Eigen::MatrixXd> covariates;
    std::vector<std::string> names;
    for (int j = 0; j < config.n_covariates; ++j) {
        Eigen::MatrixXd c(n, tau);
        for (int s = 0; s < n; ++s)
            for (int t = 0; t < tau; ++t) c(s, t) = gauss(rng);
        covariates.push_back(std::move(c));
        names.push_back("x" + std::to_string(j + 1));
    }

    // Latent field: stationary start, then the AR(1) recursion.
    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dx = stations[i].x - stations[j].x;
            const double dy = stations[i].y - stations[j].y;
            dist(i, j) = dist(j, i) = std::hypot(dx, dy);
        }
    }
    const Eigen::MatrixXd matern =
        matern_matrix(dist, config.params.theta, config.params.smoothness);
    const double g = config.params.g;
    const Eigen::MatrixXd l_innov =
        cholesky_lower(config.params.nu * matern, "state noise covariance");
    const Eigen::MatrixXd l_init =
        cholesky_lower((config.params.nu / (1.0 - g * g)) * matern, "initial state covariance");

    Eigen::MatrixXd latent(n, tau);
    Eigen::VectorXd z(n);
    for (int s = 0; s < n; ++s) z(s) = gauss(rng);
    latent.col(0) = l_init * z;
    for (int t = 1; t < tau; ++t) {
        for (int s = 0; s < n; ++s) z(s) = gauss(rng);
        latent.col(t) = g * latent.col(t - 1) + l_innov * z;
    }

    Eigen::MatrixXd y(n, tau);
    const double sd_marginal = std::sqrt(config.params.nu + config.params.sigma2_eps);
    const double eps_sd = std::sqrt(config.params.sigma2_eps);
    for (int t = 0; t < tau; ++t) {
        for (int s = 0; s < n; ++s) {
            double mean = config.params.beta(0);
            for (int j = 0; j < config.n_covariates; ++j) {
                mean += config.params.beta(j + 1) * covariates[j](s, t);
            }
            y(s, t) = mean + latent(s, t) + eps_sd * gauss(rng);
            if (t >= config.tau0) y(s, t) += config.shift * sd_marginal;
        }
    }

    SimulatedPanel out{
        Panel(std::move(stations), std::move(timeline), std::move(y), std::move(covariates),
              std::move(names)),
        WindowSplit{0, config.tau0 - 1, tau - 1},
        std::move(latent),
        config.params,
    };
    out.truth.smoothness = config.params.smoothness;
    return out;
}

const McStatRates& McCellReport::stat(const std::string& id) const {
    for (const auto& s : stats) {
        if (s.stat_id == id) return s;
    }
    throw ConfigError("statistic '" + id + "' not present in Monte Carlo cell '" + label + "'");
}

McReport run_monte_carlo(const std::vector<McCell>& grid, const McOptions& options) {
    if (grid.empty()) throw ConfigError("Monte Carlo grid is empty");
    if (options.replications < 1) throw ConfigError("replications must be >= 1");
    for (const auto& cell : grid) cell.config.validate();

    const StatRegistry registry = StatRegistry::builtin();
    std::vector<std::string> stat_ids;
    if (options.statistics.empty()) {
        for (const auto& e : registry.entries()) {
            if (e.implemented) stat_ids.push_back(e.id);
        }
    } else {
        for (const auto& id : options.statistics) {
            if (!registry.info(id).implemented) {
                throw ConfigError("statistic '" + id + "' has no kernel to run");
            }
            stat_ids.push_back(id);
        }
    }

    McReport report;
    for (size_t cell_idx = 0; cell_idx < grid.size(); ++cell_idx) {
        const McCell& cell = grid[cell_idx];
        for (ModelKind model : options.models) {
            const int reps = options.replications;
            // reject[r] holds one bit per (statistic, alpha); -1 marks failure.
            std::vector<std::vector<int8_t>> reject(
                reps, std::vector<int8_t>(stat_ids.size() * options.alphas.size(), -1));
            std::vector<int8_t> failed(reps, 0);

            const auto run_replication = [&](int r) {
                SimConfig cfg = cell.config;
                cfg.seed = derive_seed(options.seed ^ cell.config.seed,
                                       (cell_idx * options.models.size() + 1) * 1000003ULL + r);
                try {
                    const SimulatedPanel sim = simulate_panel(cfg);
                    NormalModelOptions nm_options;
                    nm_options.matern_smoothness = cfg.params.smoothness;
                    const NormalModelResult fit =
                        fit_normal_model(sim.panel, sim.split, model, nm_options);
                    const AbnormalPanel abn =
                        compute_abnormal(sim.panel, fit.normal_values, sim.split);
                    const std::vector<TestResult> results =
                        run_battery(abn, stat_ids, registry);
                    for (size_t i = 0; i < results.size(); ++i) {
                        for (size_t a = 0; a < options.alphas.size(); ++a) {
                            reject[r][i * options.alphas.size() + a] =
                                results[i].available && results[i].p_left < options.alphas[a] ? 1
                                                                                              : 0;
                        }
                    }
                } catch (const std::exception&) {
                    failed[r] = 1;
                }
            };

            if (options.threads <= 1) {
                for (int r = 0; r < reps; ++r) run_replication(r);
            } else {
                std::atomic<int> next{0};
                std::vector<std::thread> pool;
                for (int i = 0; i < std::min(options.threads, reps); ++i) {
                    pool.emplace_back([&] {
                        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
                            run_replication(r);
                        }
                    });
                }
                for (auto& th : pool) th.join();
            }

            McCellReport cr;
            cr.label = cell.label;
            cr.model = to_string(model);
            cr.replications = reps;
            cr.shift = cell.config.shift;
            int ok = 0;
            for (int r = 0; r < reps; ++r) {
                cr.failures += failed[r];
                ok += !failed[r];
            }
            cr.valid = cr.failures <= options.max_failure_share * reps && ok > 0;
            for (size_t i = 0; i < stat_ids.size(); ++i) {
                McStatRates rates;
                rates.stat_id = stat_ids[i];
                for (size_t a = 0; a < options.alphas.size(); ++a) {
                    int count = 0;
                    for (int r = 0; r < reps; ++r) {
                        if (!failed[r] && reject[r][i * options.alphas.size() + a] == 1) ++count;
                    }
                    const double p = ok > 0 ? static_cast<double>(count) / ok : 0.0;
                    rates.rejection_rate[options.alphas[a]] = p;
                    rates.mc_se[options.alphas[a]] = ok > 0 ? std::sqrt(p * (1.0 - p) / ok) : 0.0;
                }
                cr.stats.push_back(std::move(rates));
            }
            if (options.on_cell_done) options.on_cell_done(cr);
            report.cells.push_back(std::move(cr));
        }
    }
    return report;
}

std::string mc_report_csv(const McReport& report) {
    std::string out = csv_line({"scenario", "model", "shift", "stat_id", "alpha",
                                "rejection_rate", "mc_se", "replications", "failures", "valid"});
    for (const auto& cell : report.cells) {
        for (const auto& s : cell.stats) {
            for (const auto& [alpha, rate] : s.rejection_rate) {
                std::ostringstream a, r, se, sh;
                a << alpha;
                r.precision(8);
                r << rate;
                se.precision(8);
                se << s.mc_se.at(alpha);
                sh << cell.shift;
                out += csv_line({cell.label, cell.model, sh.str(), s.stat_id, a.str(), r.str(),
                                 se.str(), std::to_string(cell.replications),
                                 std::to_string(cell.failures), cell.valid ? "1" : "0"});
            }
        }
    }
    return out;
}

std::string mc_report_json(const McReport& report) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        nlohmann::json c;
        c["scenario"] = cell.label;
        c["model"] = cell.model;
        c["shift"] = cell.shift;
        c["replications"] = cell.replications;
        c["failures"] = cell.failures;
        c["valid"] = cell.valid;
        nlohmann::json stats = nlohmann::json::array();
        for (const auto& s : cell.stats) {
            nlohmann::json e;
            e["stat_id"] = s.stat_id;
            for (const auto& [alpha, rate] : s.rejection_rate) {
                std::ostringstream key;
                key << alpha;
                e["rejection_rate"][key.str()] = rate;
                e["mc_se"][key.str()] = s.mc_se.at(alpha);
            }
            stats.push_back(std::move(e));
        }
        c["statistics"] = std::move(stats);
        j.push_back(std::move(c));
    }
    return j.dump(2);
}

void parse_mc_config(const std::string& json_text, std::vector<McCell>& grid, McOptions& options) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse Monte Carlo config: ") + e.what());
    }
    try {
        options.seed = j.value("seed", 0ULL);
        options.replications = j.value("replications", 1000);
        options.threads = j.value("threads", 1);
        if (j.contains("alphas")) options.alphas = j.at("alphas").get<std::vector<double>>();
        options.models.clear();
        for (const auto& name : j.value("models", std::vector<std::string>{"lm"})) {
            options.models.push_back(model_kind_from_string(name));
        }
        options.statistics = j.value("statistics", std::vector<std::string>{});

        grid.clear();
        if (!j.contains("grid") || !j.at("grid").is_array() || j.at("grid").empty()) {
            throw ConfigError("Monte Carlo config needs a non-empty 'grid' array");
        }
        for (const auto& cj : j.at("grid")) {
            McCell cell;
            cell.label = cj.value("label", "cell" + std::to_string(grid.size()));
            cell.config.n_stations = cj.value("n_stations", 10);
            cell.config.tau0 = cj.value("tau0", 200);
            cell.config.tau1 = cj.value("tau1", 20);
            cell.config.n_covariates = cj.value("n_covariates", 2);
            cell.config.layout_side_km = cj.value("layout_side_km", 100.0);
            cell.config.shift = cj.value("shift", 0.0);
            cell.config.seed = cj.value("seed", 0ULL);
            cell.config.params.g = cj.value("g", 0.0);
            cell.config.params.nu = cj.value("nu", 1.0);
            cell.config.params.theta = cj.value("theta", 30.0);
            cell.config.params.sigma2_eps = cj.value("sigma2_eps", 1.0);
            cell.config.params.smoothness = cj.value("smoothness", 0.5);
            std::vector<double> beta =
                cj.value("beta", std::vector<double>(cell.config.n_covariates + 1, 1.0));
            cell.config.params.beta =
                Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<long>(beta.size()));
            cell.config.validate();
            grid.push_back(std::move(cell));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed Monte Carlo config: ") + e.what());
    }
}

}  // namespace stes
