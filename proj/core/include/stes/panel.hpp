#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stes/date.hpp"

namespace stes {

/// A monitoring site with planar coordinates in km. Ingestion converts
/// lon/lat inputs to planar km via an equirectangular projection about the
/// panel centroid; distances between sites feed the spatial kernel.
struct Station {
    std::string id;
    double x = 0.0;  ///< km, planar
    double y = 0.0;  ///< km, planar
    std::map<std::string, double> static_covariates;
};

/// Index split of a panel timeline into an estimation window and an event
/// window. The estimation window covers indexes [t0, t1] (tau0 points, t0
/// being the first lag-valid index), the event window (t1, t_end] (tau1
/// points). The event date is the timestamp at index t1 + 1.
struct WindowSplit {
    int t0 = 0;
    int t1 = 0;
    int t_end = 0;

    int tau0() const noexcept { return t1 - t0 + 1; }
    int tau1() const noexcept { return t_end - t1; }

    /// Throws DataError unless t0 <= t1 <= t_end, tau0 >= 10 and tau1 >= 0.
    void validate() const;
};

/// N x N symmetric matrix of pairwise Euclidean distances in km.
struct DistanceMatrix {
    Eigen::MatrixXd d;

    double diameter() const { return d.maxCoeff(); }
    double median_offdiagonal() const;
};

/// A rectangular panel of per-station time series: N stations observed on a
/// shared, equally spaced timeline, with p covariate surfaces. Missing
/// observations are NaN; covariates must be complete wherever a model uses
/// them (validated at fit time, never silently filled).
///
/// Panels are immutable after construction; operations that "modify" a panel
/// return a new one.
class Panel {
public:
    Panel(std::vector<Station> stations, std::vector<Date> timeline,
          Eigen::MatrixXd observations, std::vector<Eigen::MatrixXd> covariates,
          std::vector<std::string> covariate_names, int first_usable = 0);

    int n_stations() const noexcept { return static_cast<int>(stations_.size()); }
    int n_times() const noexcept { return static_cast<int>(timeline_.size()); }
    int n_covariates() const noexcept { return static_cast<int>(covariate_names_.size()); }

    const std::vector<Station>& stations() const noexcept { return stations_; }
    const std::vector<Date>& timeline() const noexcept { return timeline_; }

    /// N x tau observation matrix (NaN = missing).
    const Eigen::MatrixXd& observations() const noexcept { return observations_; }

    /// N x tau matrix of covariate j.
    const Eigen::MatrixXd& covariate(int j) const { return covariates_.at(j); }
    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    int covariate_index(const std::string& name) const;  ///< throws DataError when absent

    /// First time index usable for fitting (after lag construction the first
    /// max(lags) indexes hold NaN covariates and are excluded).
    int first_usable() const noexcept { return first_usable_; }

    /// Design matrix for one station over time indexes [t_begin, t_end],
    /// intercept column first. Throws DataError on NaN covariate cells.
    Eigen::MatrixXd design_matrix(int station, int t_begin, int t_end) const;

    /// N x (p+1) design at a single time index, intercept first.
    Eigen::MatrixXd design_at_time(int t) const;

private:
    std::vector<Station> stations_;
    std::vector<Date> timeline_;
    Eigen::MatrixXd observations_;
    std::vector<Eigen::MatrixXd> covariates_;
    std::vector<std::string> covariate_names_;
    int first_usable_ = 0;
};

/// Reads a panel from three CSV files.
///
/// stations_file:     id,x,y[,<static covariate>...]   (or lon/lat columns)
/// observations_file: station_id,timestamp,value        (long format)
/// covariates_file:   station_id,timestamp,name,value   (long format)
///
/// Timestamps are ISO-8601 dates; missing values are empty fields or "NA".
/// The timeline is the union of timestamps and must be equally spaced.
/// Static covariate columns in the stations file become constant covariate
/// surfaces. Pass an empty covariates path to ingest observations only.
Panel ingest_csv(const std::filesystem::path& stations_file,
                 const std::filesystem::path& observations_file,
                 const std::filesystem::path& covariates_file);

/// Returns a panel extended with lagged copies of the named covariates.
/// New columns are named "<base>_lag<k>"; the first max(lags) time indexes
/// become unusable for fitting.
Panel add_lagged_covariates(const Panel& panel, const std::vector<std::string>& base_names,
                            const std::vector<int>& lags);

/// Splits the usable timeline at an event date: the estimation window ends
/// at the index immediately before event_date. Requires >= 10 usable points
/// before the event and >= 1 after.
WindowSplit split_windows(const Panel& panel, Date event_date);

DistanceMatrix distance_matrix(const Panel& panel);

/// Summary of the N(N-1)/2 pairwise Pearson correlations of the rows of a
/// station-by-time matrix (pairwise-complete over non-missing columns).
struct CorrelationSummary {
    double mean = 0.0;
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;
    int used_pairs = 0;
    int dropped_pairs = 0;  ///< pairs with <3 overlapping points or zero variance
};

/// Pairwise-complete Pearson summary. Pairs with fewer than 3 overlapping
/// non-missing points or zero variance on the overlap are dropped and
/// counted; throws DataError when every pair is dropped.
CorrelationSummary mean_pairwise_correlation(const Eigen::MatrixXd& series_by_station);

}  // namespace stes
