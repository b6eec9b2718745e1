#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace srl::powerlaw {

enum class Variant { Continuous, Discrete };

// Tail fit with density ~ x^-(exponent+1), i.e. the reported exponent is
// beta for volumes and alpha for run lengths.
struct TailFit {
    bool available = false;
    double exponent = 0.0;
    double x_min = 0.0;       // an observed value
    size_t n_tail = 0;        // samples >= x_min
    double ks = 1.0;          // KS distance of the selected tail
    Variant variant = Variant::Continuous;
};

struct ClausetOptions {
    size_t max_candidates = 1000;  // quantile-spaced cap over distinct values
    size_t min_tail = 10;
    std::optional<double> fixed_x_min;  // skip the KS scan when supplied
};

// Clauset-style tail estimation: per candidate x_min, tail-index MLE
// (continuous closed form / discrete zeta likelihood), x_min chosen by
// minimum KS distance. No bootstrap goodness-of-fit stage.
TailFit clauset_fit(std::vector<double> samples, Variant variant,
                    const ClausetOptions& opts = {});

// Hurwitz zeta sum_{j>=0} (x_min + j)^-a, a > 1. Exposed for tests.
double hurwitz_zeta(double a, double x_min);

struct PredictionRow {
    std::string stock;
    double delta = 0.0;
    double alpha = 0.0;  // run-length tail exponent
    double beta = 0.0;   // volume tail exponent
};

struct PredictionTest {
    std::vector<PredictionRow> rows;
    std::optional<double> r_delta_alpha;  // pearson(delta, alpha - 1); nullopt if degenerate
    std::optional<double> r_delta_beta;   // pearson(delta, beta - 1)
};

// NaN-free: a constant column yields an empty optional.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Requires >= 3 complete rows.
PredictionTest test_predictions(std::vector<PredictionRow> rows);

void write_prediction_scatter(const std::string& path, const PredictionTest& test);

} // namespace srl::powerlaw
