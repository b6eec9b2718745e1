#pragma once

#include "srl/nullmodel.hpp"
#include "srl/powerlaw.hpp"

namespace srl::report {

struct Histogram {
    double lo = 0.0, hi = 0.0, width = 0.0;
    std::vector<long long> counts;  // half-open bins [lo + i*w, lo + (i+1)*w)
    long long below = 0, above = 0;
    long long n_in = 0;
    double mean = 0.0, stddev = 0.0, sem = 0.0;  // in-range values only
};

// Throws when hi <= lo or width <= 0.
Histogram make_histogram(std::span<const double> values, double lo, double hi, double width);
void write_histogram(const std::string& path, const Histogram& h);

// Chronological halves for cross-validation. Dates compare lexicographically
// (ISO format); each half keeps days in [first, last]. Stocks are renamed
// with a split suffix so the halves count as distinct entities downstream.
struct SplitRange {
    std::string first, last;
    std::string suffix;
};

struct SplitConfig {
    std::vector<SplitRange> splits = {
        {"2012-01-04", "2015-09-18", "@1"},
        {"2015-09-24", "2019-11-02", "@2"},
    };
};

orderflow::Stream apply_splits(const orderflow::Stream& stream, const SplitConfig& cfg);

struct SplitSummary {
    SplitRange range;
    impact::FitSummary deltas;  // over available per-stock fits in the half
    size_t n_stocks = 0;
};

std::vector<SplitSummary> crossvalidate(const orderflow::Stream& stream,
                                        const SplitConfig& splits,
                                        const impact::AnalysisConfig& cfg);

// Per-window re-estimation of stock-level delta, restricted to metaorders
// with T inside the window. Stocks contribute only when they retain more
// than min_samples metaorders in the window.
struct HorizonResult {
    impact::HorizonWindow window;  // seconds
    impact::FitSummary deltas;
    size_t n_stocks = 0;
    long long n_samples = 0;
};

std::vector<impact::HorizonWindow> default_horizon_windows();  // minutes 1-10,10-30,30-60,60-300

std::vector<HorizonResult> horizon_robustness(const std::vector<impact::ImpactSample>& samples,
                                              const metaorder::StockCatalog& catalog,
                                              const impact::AnalysisConfig& cfg,
                                              long long min_samples = 10000);

void write_split_summaries(const std::string& path, const std::vector<SplitSummary>& rows);
void write_horizon_results(const std::string& path, const std::vector<HorizonResult>& rows);

// End-to-end run. Input is either a raw event log or an already-built
// market-order stream (plus day flags).
struct PipelineConfig {
    std::string events_path;               // mutually exclusive with stream_path
    std::string stream_path, flags_path;
    orderflow::EventFormat event_format = orderflow::EventFormat::Csv;
    std::string out_dir;

    impact::AnalysisConfig analysis;
    SplitConfig splits;
    bool run_splits = true;
    bool run_horizon = true;
    long long horizon_min_samples = 10000;

    bool run_mc = true;
    int mc_trials = 100;
    double mc_noise_scale = 1.0;

    // delta / c histogram ranges
    double delta_hist_lo = 0.0, delta_hist_hi = 1.0, delta_hist_width = 0.02;
    double c_hist_lo = 0.0, c_hist_hi = 5.0, c_hist_width = 0.1;

    uint64_t seed = 0;
    int threads = 1;
    std::string config_digest;  // hash of the user-facing config, for the manifest
};

struct PipelineResult {
    impact::FitTable stock_fits;
    impact::FitTable trader_fits;
    nullmodel::MonteCarloSummary mc;
    bool mc_ran = false;
    std::optional<nullmodel::BiasCorrected> corrected;
};

// Writes every artifact into cfg.out_dir, plus manifest.txt. On failure a
// FAILED marker naming the stage is left behind and the exception rethrown.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// Synthetic end-to-end fixture: simulates the schedules and exports the
// paths as a stream.csv / flags.csv pair consumable by the pipeline.
void write_synth_fixture(const nullmodel::SynthConfig& cfg, const std::string& dir);

extern const char* kCodeVersion;

} // namespace srl::report
