#pragma once

#include "srl/metaorder.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

namespace srl::impact {

using metaorder::Metaorder;
using metaorder::StatsTable;
using metaorder::StockCatalog;
using orderflow::Stream;

// Dimensionless peak-impact pair for one metaorder.
struct ImpactSample {
    std::string stock;
    std::string trader;
    std::string day;
    int r = 0;
    double q = 0.0;       // |Q| / V_D
    double impact = 0.0;  // sign * (m(t_E+1) - m(t_S)) / sigma_D
    double T = 0.0;       // liquidation horizon, seconds
};

// Log-even bins centered at 10^(-3 + k*0.05), k = 0..60.
struct BinnedImpact {
    static constexpr int kNumBins = 61;
    static constexpr double kDelta = 0.05;
    static constexpr double kLogLo = -3.0;

    std::array<double, kNumBins> sum{};
    std::array<double, kNumBins> sum_sq{};
    std::array<long long, kNumBins> count{};
    size_t dropped_out_of_range = 0;

    static double center(int k) { return std::pow(10.0, kLogLo + k * kDelta); }

    // -1 when q falls outside the total bin range
    static int bin_index(double q) {
        if (!(q > 0.0)) return -1;
        int k = static_cast<int>(std::floor((std::log10(q) - kLogLo + kDelta / 2.0) / kDelta));
        return (k >= 0 && k < kNumBins) ? k : -1;
    }

    void add(double q, double impact) {
        int k = bin_index(q);
        if (k < 0) {
            ++dropped_out_of_range;
            return;
        }
        sum[k] += impact;
        sum_sq[k] += impact * impact;
        ++count[k];
    }

    void add_at(int k, double impact) {
        sum[k] += impact;
        sum_sq[k] += impact * impact;
        ++count[k];
    }

    double mean(int k) const { return sum[k] / static_cast<double>(count[k]); }

    double sem(int k) const {
        if (count[k] < 2) return 0.0;
        double n = static_cast<double>(count[k]);
        double var = (sum_sq[k] - sum[k] * sum[k] / n) / (n - 1.0);
        return std::sqrt(std::max(var, 0.0) / n);
    }

    long long total_count() const {
        long long t = 0;
        for (long long c : count) t += c;
        return t;
    }
};

struct PowerFit {
    bool available = false;
    bool converged = false;
    double delta = 0.0;
    double c = 0.0;
    int n_bin = 0;        // bins with count > threshold
    double objective = 0.0;
};

struct FitOptions {
    long long min_bin_count = 100;  // strict: N_k > 100
    double param_tol = 1e-9;
    int max_iterations = 10000;
};

// Relative least squares on binned conditional means:
//   min over (c, delta) of sum_k [ (mean_k - c q_k^delta) / (c q_k^delta) ]^2
// restricted to valid bins. Nelder-Mead over (log c, delta), seeded by
// log-log OLS, followed by a Gauss-Newton polish.
PowerFit fit_power_law(const BinnedImpact& binned, const FitOptions& opts = {});

double relative_ls_objective(const BinnedImpact& binned, double c, double delta,
                             long long min_bin_count = 100);

// One-parameter fit with delta fixed at 1/2; closed form.
std::optional<double> fit_prefactor_sqrt(const BinnedImpact& binned,
                                         long long min_bin_count = 100);

struct DropCounters {
    size_t missing_post_midprice = 0;  // metaorder ends at the day's last tick
    size_t missing_stats = 0;
};

std::vector<ImpactSample> compute_impact_samples(const std::vector<Metaorder>& metaorders,
                                                 const StatsTable& stats,
                                                 const Stream& stream,
                                                 DropCounters& drops);

// Keeps T >= min_T and, when given, T in [window.lo, window.hi) (seconds).
struct HorizonWindow {
    double lo = 0.0, hi = 0.0;
};

std::vector<ImpactSample> filter_samples(const std::vector<ImpactSample>& samples,
                                         double min_T_seconds = 60.0,
                                         std::optional<HorizonWindow> window = std::nullopt);

BinnedImpact bin_samples(const std::vector<ImpactSample>& samples);
BinnedImpact bin_samples(std::span<const double> q, std::span<const double> impact);

// Estimator thresholds shared by the real-data path and the null model.
struct AnalysisConfig {
    double min_horizon_sec = 60.0;
    std::optional<HorizonWindow> horizon_window;
    long long valid_bin_min_count = 100;       // strict >
    long long liquid_min_metaorders = 100000;  // strict >
    long long active_min_metaorders = 10000;   // >=
    int active_min_bins = 10;                  // strict >
    double solver_tol = 1e-9;

    FitOptions fit_options() const {
        return FitOptions{valid_bin_min_count, solver_tol, 10000};
    }
};

// Fingerprint of everything that changes the estimator's output; used to
// refuse bias correction across mismatched configurations.
uint64_t estimator_fingerprint(const AnalysisConfig& cfg);

struct EntityFit {
    std::string entity;  // stock, or stock:trader
    PowerFit fit;
    BinnedImpact binned;
};

struct FitSummary {
    size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double sem = 0.0;
};

struct FitTable {
    std::vector<EntityFit> fits;        // ordered by entity
    std::vector<std::string> skipped;   // entities failing preconditions
    FitSummary delta_summary;           // over available fits
    uint64_t fingerprint = 0;
};

FitSummary summarize(std::span<const double> values);

// Samples are expected to be horizon-filtered already. Stock level includes
// every trader's metaorders; only liquid stocks are fitted.
FitTable fit_all_stocks(const std::vector<ImpactSample>& samples,
                        const StockCatalog& catalog, const AnalysisConfig& cfg);

// Trader level: active traders only (catalog count >= threshold and enough
// valid bins after binning).
FitTable fit_all_traders(const std::vector<ImpactSample>& samples,
                         const StockCatalog& catalog, const AnalysisConfig& cfg);

// Average of per-entity rescaled profiles I(q)/c_entity on x = sqrt(q).
struct ScalingCurve {
    std::array<double, BinnedImpact::kNumBins> x{};
    std::array<double, BinnedImpact::kNumBins> phi_avg{};
    std::array<double, BinnedImpact::kNumBins> sem{};
    std::array<long long, BinnedImpact::kNumBins> count{};  // entities per point
    size_t skipped_entities = 0;
};

ScalingCurve aggregate_scaling(const std::vector<EntityFit>& entities,
                               long long min_bin_count = 100);

void write_fit_table(const std::string& path, const FitTable& table);
void write_binned(const std::string& path, const BinnedImpact& binned);
void write_scaling_curve(const std::string& path, const ScalingCurve& curve);

} // namespace srl::impact
