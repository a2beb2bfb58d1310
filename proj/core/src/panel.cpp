#include "stes/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "stes/csv.hpp"
#include "stes/errors.hpp"

namespace stes {

namespace {

bool is_missing(double v) { return std::isnan(v); }

constexpr double kEarthRadiusKm = 6371.0;

double quantile_type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void WindowSplit::validate() const {
    if (t0 > t1 || t1 > t_end) {
        throw DataError("window split indexes out of order (t0=" + std::to_string(t0) +
                        ", t1=" + std::to_string(t1) + ", t_end=" + std::to_string(t_end) + ")");
    }
    if (tau0() < 10) {
        throw DataError("estimation window too short: tau0=" + std::to_string(tau0()) +
                        " (need >= 10)");
    }
}

double DistanceMatrix::median_offdiagonal() const {
    const int n = static_cast<int>(d.rows());
    std::vector<double> vals;
    vals.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) vals.push_back(d(i, j));
    if (vals.empty()) return 0.0;
    return quantile_type7(std::move(vals), 0.5);
}

Panel::Panel(std::vector<Station> stations, std::vector<Date> timeline,
             Eigen::MatrixXd observations, std::vector<Eigen::MatrixXd> covariates,
             std::vector<std::string> covariate_names, int first_usable)
    : stations_(std::move(stations)),
      timeline_(std::move(timeline)),
      observations_(std::move(observations)),
      covariates_(std::move(covariates)),
      covariate_names_(std::move(covariate_names)),
      first_usable_(first_usable) {
    const int n = n_stations();
    const int tau = n_times();
    if (n < 1) throw DataError("panel needs at least one station");
    if (tau < 3) throw DataError("panel needs at least 3 time points, got " + std::to_string(tau));
    if (observations_.rows() != n || observations_.cols() != tau) {
        throw DataError("observation matrix shape does not match stations x timeline");
    }
    if (covariates_.size() != covariate_names_.size()) {
        throw DataError("covariate matrices and names differ in count");
    }
    for (const auto& c : covariates_) {
        if (c.rows() != n || c.cols() != tau) {
            throw DataError("covariate matrix shape does not match stations x timeline");
        }
    }
    std::unordered_set<std::string> seen;
    for (const auto& s : stations_) {
        if (!seen.insert(s.id).second) throw DataError("duplicate station id '" + s.id + "'");
        if (!std::isfinite(s.x) || !std::isfinite(s.y)) {
            throw DataError("non-finite coordinates for station '" + s.id + "'");
        }
    }
    if (tau >= 2) {
        const std::int64_t step = timeline_[1] - timeline_[0];
        if (step <= 0) throw DataError("timeline must be strictly increasing");
        for (int t = 1; t < tau; ++t) {
            if (timeline_[t] - timeline_[t - 1] != step) {
                throw DataError("non-constant time step between " + timeline_[t - 1].to_string() +
                                " and " + timeline_[t].to_string());
            }
        }
    }
    for (int s = 0; s < n; ++s) {
        bool any = false;
        for (int t = 0; t < tau; ++t) {
            if (!is_missing(observations_(s, t))) {
                any = true;
                break;
            }
        }
        if (!any) throw DataError("station '" + stations_[s].id + "' has no observations at all");
    }
    if (first_usable_ < 0 || first_usable_ >= tau) {
        throw DataError("first usable index out of range");
    }
}

int Panel::covariate_index(const std::string& name) const {
    for (int j = 0; j < n_covariates(); ++j) {
        if (covariate_names_[j] == name) return j;
    }
    throw DataError("unknown covariate '" + name + "'");
}

Eigen::MatrixXd Panel::design_matrix(int station, int t_begin, int t_end) const {
    const int len = t_end - t_begin + 1;
    Eigen::MatrixXd X(len, n_covariates() + 1);
    X.col(0).setOnes();
    for (int j = 0; j < n_covariates(); ++j) {
        for (int t = 0; t < len; ++t) {
            const double v = covariates_[j](station, t_begin + t);
            if (is_missing(v)) {
                throw DataError("missing covariate '" + covariate_names_[j] + "' for station '" +
                                stations_[station].id + "' at " +
                                timeline_[t_begin + t].to_string());
            }
            X(t, j + 1) = v;
        }
    }
    return X;
}

Eigen::MatrixXd Panel::design_at_time(int t) const {
    Eigen::MatrixXd X(n_stations(), n_covariates() + 1);
    X.col(0).setOnes();
    for (int j = 0; j < n_covariates(); ++j) {
        for (int s = 0; s < n_stations(); ++s) {
            const double v = covariates_[j](s, t);
            if (is_missing(v)) {
                throw DataError("missing covariate '" + covariate_names_[j] + "' for station '" +
                                stations_[s].id + "' at " + timeline_[t].to_string());
            }
            X(s, j + 1) = v;
        }
    }
    return X;
}

Panel ingest_csv(const std::filesystem::path& stations_file,
                 const std::filesystem::path& observations_file,
                 const std::filesystem::path& covariates_file) {
    // Stations: ordered by first appearance in the stations file.
    const CsvTable st = read_csv(stations_file);
    const std::string st_ctx = stations_file.string();
    const int id_col = st.require_column("id", st_ctx);

    auto xcol = st.column("x");
    auto ycol = st.column("y");
    auto loncol = st.column("lon");
    if (!loncol) loncol = st.column("longitude");
    auto latcol = st.column("lat");
    if (!latcol) latcol = st.column("latitude");
    const bool geographic = !xcol && loncol && latcol;
    if (!geographic && (!xcol || !ycol)) {
        throw DataError(st_ctx + ": stations need either x,y (planar km) or lon,lat columns");
    }

    std::vector<Station> stations;
    std::vector<std::string> static_names;
    for (size_t j = 0; j < st.header.size(); ++j) {
        const std::string& h = st.header[j];
        if (h == "id" || h == "x" || h == "y" || h == "lon" || h == "lat" ||
            h == "longitude" || h == "latitude") {
            continue;
        }
        static_names.push_back(h);
    }

    std::unordered_map<std::string, int> station_index;
    for (const auto& row : st.rows) {
        Station s;
        s.id = row[id_col];
        if (s.id.empty()) throw DataError(st_ctx + ": empty station id");
        if (station_index.count(s.id)) {
            throw DataError(st_ctx + ": duplicate station id '" + s.id + "'");
        }
        if (geographic) {
            s.x = parse_value(row[*loncol], st_ctx);  // degrees for now, projected below
            s.y = parse_value(row[*latcol], st_ctx);
        } else {
            s.x = parse_value(row[*xcol], st_ctx);
            s.y = parse_value(row[*ycol], st_ctx);
        }
        if (std::isnan(s.x) || std::isnan(s.y)) {
            throw DataError(st_ctx + ": missing coordinate for station '" + s.id + "'");
        }
        for (const auto& name : static_names) {
            const int col = *st.column(name);
            s.static_covariates[name] = parse_value(row[col], st_ctx);
        }
        station_index.emplace(s.id, static_cast<int>(stations.size()));
        stations.push_back(std::move(s));
    }
    if (stations.empty()) throw DataError(st_ctx + ": no stations");

    if (geographic) {
        // Equirectangular projection about the centroid; adequate at the
        // regional extents this tool targets.
        double lon0 = 0, lat0 = 0;
        for (const auto& s : stations) {
            lon0 += s.x;
            lat0 += s.y;
        }
        lon0 /= static_cast<double>(stations.size());
        lat0 /= static_cast<double>(stations.size());
        const double deg = std::numbers::pi / 180.0;
        const double clat = std::cos(lat0 * deg);
        for (auto& s : stations) {
            const double lon = s.x, lat = s.y;
            s.x = kEarthRadiusKm * clat * (lon - lon0) * deg;
            s.y = kEarthRadiusKm * (lat - lat0) * deg;
        }
    }

    // Observations: long format, building the timestamp union as we go.
    const CsvTable obs = read_csv(observations_file);
    const std::string obs_ctx = observations_file.string();
    const int o_sid = obs.require_column("station_id", obs_ctx);
    const int o_ts = obs.require_column("timestamp", obs_ctx);
    const int o_val = obs.require_column("value", obs_ctx);

    std::set<Date> stamp_union;
    struct ObsCell {
        int station;
        Date when;
        double value;
    };
    std::vector<ObsCell> obs_cells;
    obs_cells.reserve(obs.rows.size());
    for (const auto& row : obs.rows) {
        const auto it = station_index.find(row[o_sid]);
        if (it == station_index.end()) {
            throw DataError(obs_ctx + ": observation references unknown station '" + row[o_sid] +
                            "'");
        }
        const Date when = Date::parse(row[o_ts]);
        stamp_union.insert(when);
        obs_cells.push_back({it->second, when, parse_value(row[o_val], obs_ctx)});
    }

    struct CovCell {
        int station;
        Date when;
        int cov;
        double value;
    };
    std::vector<CovCell> cov_cells;
    std::vector<std::string> cov_names;
    std::unordered_map<std::string, int> cov_index;
    if (!covariates_file.empty()) {
        const CsvTable cov = read_csv(covariates_file);
        const std::string cov_ctx = covariates_file.string();
        const int c_sid = cov.require_column("station_id", cov_ctx);
        const int c_ts = cov.require_column("timestamp", cov_ctx);
        const int c_name = cov.require_column("name", cov_ctx);
        const int c_val = cov.require_column("value", cov_ctx);
        cov_cells.reserve(cov.rows.size());
        for (const auto& row : cov.rows) {
            const auto it = station_index.find(row[c_sid]);
            if (it == station_index.end()) {
                throw DataError(cov_ctx + ": covariate references unknown station '" + row[c_sid] +
                                "'");
            }
            const Date when = Date::parse(row[c_ts]);
            stamp_union.insert(when);
            auto [name_it, inserted] =
                cov_index.emplace(row[c_name], static_cast<int>(cov_names.size()));
            if (inserted) cov_names.push_back(row[c_name]);
            cov_cells.push_back({it->second, when, name_it->second, parse_value(row[c_val], cov_ctx)});
        }
    }

    if (stamp_union.size() < 3) {
        throw DataError(obs_ctx + ": need at least 3 distinct timestamps, got " +
                        std::to_string(stamp_union.size()));
    }
    std::vector<Date> timeline(stamp_union.begin(), stamp_union.end());
    const std::int64_t step = timeline[1] - timeline[0];
    for (size_t t = 1; t < timeline.size(); ++t) {
        if (timeline[t] - timeline[t - 1] != step) {
            throw DataError("timeline has a non-constant step between " +
                            timeline[t - 1].to_string() + " and " + timeline[t].to_string());
        }
    }
    std::unordered_map<std::int64_t, int> time_index;
    for (size_t t = 0; t < timeline.size(); ++t) {
        time_index.emplace(timeline[t].days(), static_cast<int>(t));
    }

    const int n = static_cast<int>(stations.size());
    const int tau = static_cast<int>(timeline.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd observations = Eigen::MatrixXd::Constant(n, tau, nan);
    Eigen::MatrixXd filled = Eigen::MatrixXd::Zero(n, tau);
    for (const auto& cell : obs_cells) {
        const int t = time_index.at(cell.when.days());
        if (filled(cell.station, t) != 0.0) {
            throw DataError(obs_ctx + ": duplicate observation for station '" +
                            stations[cell.station].id + "' at " + cell.when.to_string());
        }
        filled(cell.station, t) = 1.0;
        observations(cell.station, t) = cell.value;
    }

    std::vector<Eigen::MatrixXd> covariates(cov_names.size(),
                                            Eigen::MatrixXd::Constant(n, tau, nan));
    std::vector<Eigen::MatrixXd> cov_filled(cov_names.size(), Eigen::MatrixXd::Zero(n, tau));
    for (const auto& cell : cov_cells) {
        const int t = time_index.at(cell.when.days());
        if (cov_filled[cell.cov](cell.station, t) != 0.0) {
            throw DataError(covariates_file.string() + ": duplicate covariate '" +
                            cov_names[cell.cov] + "' for station '" + stations[cell.station].id +
                            "' at " + cell.when.to_string());
        }
        cov_filled[cell.cov](cell.station, t) = 1.0;
        covariates[cell.cov](cell.station, t) = cell.value;
    }

    // Static station covariates become constant surfaces.
    for (const auto& name : static_names) {
        Eigen::MatrixXd surf(n, tau);
        for (int s = 0; s < n; ++s) surf.row(s).setConstant(stations[s].static_covariates.at(name));
        covariates.push_back(std::move(surf));
        cov_names.push_back(name);
    }

    return Panel(std::move(stations), std::move(timeline), std::move(observations),
                 std::move(covariates), std::move(cov_names));
}

Panel add_lagged_covariates(const Panel& panel, const std::vector<std::string>& base_names,
                            const std::vector<int>& lags) {
    if (base_names.empty() || lags.empty()) {
        throw ConfigError("add_lagged_covariates needs at least one base name and one lag");
    }
    const int tau = panel.n_times();
    int max_lag = 0;
    for (int k : lags) {
        if (k < 1) throw ConfigError("lags must be positive, got " + std::to_string(k));
        if (k >= tau) {
            throw ConfigError("lag " + std::to_string(k) + " is not smaller than the timeline (" +
                              std::to_string(tau) + " points)");
        }
        max_lag = std::max(max_lag, k);
    }

    std::vector<Eigen::MatrixXd> covariates;
    std::vector<std::string> names;
    for (int j = 0; j < panel.n_covariates(); ++j) {
        covariates.push_back(panel.covariate(j));
        names.push_back(panel.covariate_names()[j]);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& base : base_names) {
        const int j = panel.covariate_index(base);  // throws on unknown base
        for (int k : lags) {
            Eigen::MatrixXd lagged = Eigen::MatrixXd::Constant(panel.n_stations(), tau, nan);
            lagged.rightCols(tau - k) = panel.covariate(j).leftCols(tau - k);
            covariates.push_back(std::move(lagged));
            names.push_back(base + "_lag" + std::to_string(k));
        }
    }

    return Panel(panel.stations(), panel.timeline(), panel.observations(), std::move(covariates),
                 std::move(names), std::max(panel.first_usable(), max_lag));
}

WindowSplit split_windows(const Panel& panel, Date event_date) {
    const auto& timeline = panel.timeline();
    if (event_date <= timeline.front() || event_date > timeline.back()) {
        throw DataError("event date " + event_date.to_string() + " is outside the timeline " +
                        timeline.front().to_string() + " .. " + timeline.back().to_string());
    }
    int t1 = -1;
    for (int t = 0; t < panel.n_times(); ++t) {
        if (timeline[t] < event_date) t1 = t;
    }
    WindowSplit split{panel.first_usable(), t1, panel.n_times() - 1};
    if (split.tau0() < 10) {
        throw DataError("estimation window before " + event_date.to_string() + " has only " +
                        std::to_string(split.tau0()) + " usable points (need >= 10)");
    }
    if (split.tau1() < 1) {
        throw DataError("event window after " + event_date.to_string() + " is empty");
    }
    split.validate();
    return split;
}

DistanceMatrix distance_matrix(const Panel& panel) {
    const int n = panel.n_stations();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = panel.stations()[i].x - panel.stations()[j].x;
            const double dy = panel.stations()[i].y - panel.stations()[j].y;
            d(i, j) = d(j, i) = std::hypot(dx, dy);
        }
    }
    // Spot-check the metric on a few triples.
    if (n >= 3) {
        std::mt19937 rng(static_cast<unsigned>(n));
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int k = 0; k < 5; ++k) {
            const int a = pick(rng), b = pick(rng), c = pick(rng);
            if (d(a, c) > d(a, b) + d(b, c) + 1e-9) {
                throw NumericError("distance matrix violates the triangle inequality");
            }
        }
    }
    return DistanceMatrix{std::move(d)};
}

CorrelationSummary mean_pairwise_correlation(const Eigen::MatrixXd& series_by_station) {
    const int n = static_cast<int>(series_by_station.rows());
    const int tau = static_cast<int>(series_by_station.cols());
    if (n < 2) throw DataError("pairwise correlation needs at least 2 stations");

    std::vector<double> cors;
    int dropped = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            int m = 0;
            for (int t = 0; t < tau; ++t) {
                const double a = series_by_station(i, t);
                const double b = series_by_station(j, t);
                if (std::isnan(a) || std::isnan(b)) continue;
                sx += a;
                sy += b;
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
                ++m;
            }
            if (m < 3) {
                ++dropped;
                continue;
            }
            const double vx = sxx - sx * sx / m;
            const double vy = syy - sy * sy / m;
            if (vx <= 0.0 || vy <= 0.0) {
                ++dropped;
                continue;
            }
            cors.push_back((sxy - sx * sy / m) / std::sqrt(vx * vy));
        }
    }
    if (cors.empty()) {
        throw DataError("no station pair has enough overlapping data for a correlation");
    }

    CorrelationSummary s;
    s.used_pairs = static_cast<int>(cors.size());
    s.dropped_pairs = dropped;
    s.mean = 0;
    for (double c : cors) s.mean += c;
    s.mean /= static_cast<double>(cors.size());
    s.min = *std::min_element(cors.begin(), cors.end());
    s.max = *std::max_element(cors.begin(), cors.end());
    s.q25 = quantile_type7(cors, 0.25);
    s.median = quantile_type7(cors, 0.5);
    s.q75 = quantile_type7(cors, 0.75);
    return s;
}

}  // namespace stes
