#pragma once

#include "srl/impact.hpp"
#include "srl/rng.hpp"

#include <functional>

namespace srl::nullmodel {

// Execution schedule for one stock: metaorders with their child ticks in
// physical time, plus the calibration (c, sigma_D) the simulator needs.
// Child volumes are dimensionless (q = cumulative volume / V_D) so a
// completed metaorder of dimensionless size Q injects exactly c*sigma_D*sqrt(Q).
struct ScheduleTick {
    double noise_sd;   // sqrt((t(k) - t(k-1)) / 18000), t(-1) := 0
    double sqrt_dq;    // sqrt(q_k) - sqrt(q_{k-1}) within the owning metaorder
    int32_t meta;      // index into StockSchedule::metas
};

struct ScheduleMeta {
    int32_t day = 0;       // index into days
    int32_t trader = 0;    // index into traders
    int8_t sign = +1;      // base sign before shuffling
    double q = 0.0;        // dimensionless metaorder volume
    double T = 0.0;        // liquidation horizon, seconds
    int32_t first_tick = 0, last_tick = 0;  // indices into the day's ticks
};

struct ScheduleDay {
    std::string day;
    double sigma_D = 1.0;
    std::vector<ScheduleTick> ticks;
};

struct StockSchedule {
    std::string stock;
    double c = 1.0;  // calibrated one-parameter SRL prefactor
    std::vector<std::string> traders;
    std::vector<ScheduleDay> days;
    std::vector<ScheduleMeta> metas;  // ordered by (day, first_tick)
};

struct SimConfig {
    uint64_t seed = 0;
    double noise_scale = 1.0;  // 0 disables the diffusion term
    int n_trials = 100;
};

// Uniform permutation of the metaorder signs within one stock, across all
// traders, metaorders and days. Child orders inherit the metaorder sign.
std::vector<int8_t> shuffle_signs(const StockSchedule& schedule, SplitMix64& rng);

// Midprice path for one day: m[0] is the opening midprice (just before tick
// 1), m[k] the midprice after the k-th transaction.
//   m(t) = m(t-1) + c*sigma_D*sign*(sqrt(q_t) - sqrt(q_{t-1}))
//        + noise_scale*sigma_D*sigma(t)*dW
std::vector<double> simulate_prices(const ScheduleDay& day, std::span<const int8_t> signs,
                                    double c, double noise_scale, double m0, SplitMix64& rng);

// One trial for one stock: dimensionless peak-impact samples per metaorder,
// in metaorder order (q, impact, T filled; entity fields left empty).
struct TrialSample {
    double q;
    double impact;
    double T;
    int32_t trader;
};

std::vector<TrialSample> simulate_stock(const StockSchedule& schedule,
                                        std::span<const int8_t> signs,
                                        double noise_scale, SplitMix64& rng);

// Synthetic schedule generator. Metaorders occupy contiguous, non-overlapping
// tick blocks so the injected impact of one metaorder never leaks into
// another's measurement window.
struct SynthConfig {
    int n_stocks = 10;
    long long metaorders_per_stock = 10000;
    int metaorders_per_day = 200;
    int traders_per_stock = 1;

    // run lengths: integerized Pareto with tail exponent alpha, clamped
    double alpha = 1.5;
    int l_min = 1;
    int l_max = 10000;

    enum class QMode { PowerLaw, BinCenters };
    QMode q_mode = QMode::PowerLaw;
    double beta = 1.5;    // volume tail exponent (PowerLaw)
    double q_scale = 0.0; // PowerLaw x_min for q; 0 = auto (1 / (3 * metaorders_per_day))
    int k_min = 0, k_max = 60;  // bin-index range (BinCenters)

    double min_duration_sec = 60.0;
    double max_duration_sec = 900.0;  // log-uniform between min and max
    double c = 1.0;
    double sigma_D = 1.0;
    uint64_t seed = 0;
};

StockSchedule synth_schedule(const SynthConfig& cfg, size_t stock_index);

// Builds schedules for real (or exported synthetic) data out of the
// extraction results; per-stock c comes from a one-parameter SRL fit on the
// measured samples. Liquid stocks only.
std::vector<StockSchedule> schedules_from_data(const orderflow::Stream& stream,
                                               const metaorder::ExtractionResult& extraction,
                                               const metaorder::StockCatalog& catalog,
                                               const impact::AnalysisConfig& cfg);

struct McConfig {
    uint64_t seed = 0;
    double noise_scale = 1.0;
    int n_trials = 100;
    int threads = 1;
    impact::AnalysisConfig analysis;
};

struct MonteCarloSummary {
    int n_trials = 0;
    size_t dropped_trials = 0;

    // stock level
    double mean_delta = 0.0, se_mean_delta = 0.0;        // <<delta>>, SE
    double mean_sigma_delta = 0.0, se_sigma_delta = 0.0; // <<sigma_delta>>, SE
    double bias = 0.0;                                   // <<delta>> - 1/2
    std::vector<double> trial_mean_delta;                // <delta>_l
    std::vector<double> trial_sigma_delta;

    // trader level
    bool trader_level = false;
    double trader_mean_delta = 0.0, trader_se_mean_delta = 0.0;
    double trader_mean_sigma = 0.0, trader_se_sigma = 0.0;
    std::vector<double> trial_trader_mean_delta;
    std::vector<double> trial_trader_sigma;

    // per-trial per-stock deltas, for persistence: [trial][stock index]
    std::vector<std::string> stocks;
    std::vector<std::vector<double>> per_trial_delta;  // NaN when unavailable

    uint64_t estimator_fingerprint = 0;
};

using ScheduleProvider = std::function<StockSchedule(size_t)>;

// Runs the null model with the same estimator as the real-data pipeline.
// Deterministic for fixed (seed, config): per-(stock, trial) RNG streams are
// derived by hashing, so thread count and execution order cannot change the
// result.
MonteCarloSummary run_monte_carlo(size_t n_stocks, const ScheduleProvider& provider,
                                  const McConfig& cfg);
MonteCarloSummary run_monte_carlo(const std::vector<StockSchedule>& schedules,
                                  const McConfig& cfg);

struct BiasCorrected {
    double mean = 0.0;
    double se = 0.0;  // sqrt(sem^2 + se_mc^2)
};

// <delta>_unbiased = <delta> - (<<delta>> - 1/2). Throws when the estimator
// configurations behind the two inputs differ.
BiasCorrected bias_correct(double mean_delta, double sem, uint64_t fit_fingerprint,
                           const MonteCarloSummary& mc);

void write_mc_summary(const std::string& path, const MonteCarloSummary& mc,
                      const McConfig& cfg);
void write_mc_trials(const std::string& path, const MonteCarloSummary& mc);

} // namespace srl::nullmodel
