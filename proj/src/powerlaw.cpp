#include "srl/powerlaw.hpp"
#include "srl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace srl::powerlaw {

double hurwitz_zeta(double a, double x_min) {
    // direct sum plus an Euler-Maclaurin tail
    constexpr int kDirect = 32;
    double s = 0.0;
    for (int j = 0; j < kDirect; ++j) s += std::pow(x_min + j, -a);
    double m = x_min + kDirect;
    s += std::pow(m, 1.0 - a) / (a - 1.0) + 0.5 * std::pow(m, -a) +
         a / 12.0 * std::pow(m, -a - 1.0) -
         a * (a + 1.0) * (a + 2.0) / 720.0 * std::pow(m, -a - 3.0);
    return s;
}

namespace {

// Distinct-value view of a sorted sample: values plus first index per value.
struct Distinct {
    std::vector<double> value;
    std::vector<size_t> first_index;
};

Distinct distinct_values(const std::vector<double>& sorted) {
    Distinct d;
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (i == 0 || sorted[i] != sorted[i - 1]) {
            d.value.push_back(sorted[i]);
            d.first_index.push_back(i);
        }
    }
    return d;
}

// At most max_candidates, quantile-spaced across distinct values.
std::vector<size_t> candidate_indices(size_t n_distinct, size_t max_candidates) {
    std::vector<size_t> idx;
    if (n_distinct <= max_candidates) {
        idx.resize(n_distinct);
        for (size_t i = 0; i < n_distinct; ++i) idx[i] = i;
        return idx;
    }
    idx.reserve(max_candidates);
    for (size_t i = 0; i < max_candidates; ++i) {
        size_t j = (i * (n_distinct - 1)) / (max_candidates - 1);
        if (idx.empty() || idx.back() != j) idx.push_back(j);
    }
    return idx;
}

// Continuous tail: density ~ x^-(beta+1) above x_min.
// MLE: beta = n / sum ln(x_i / x_min).
double continuous_mle(const std::vector<double>& sum_ln_suffix, size_t i0, size_t n,
                      double x_min) {
    double n_tail = static_cast<double>(n - i0);
    double s = sum_ln_suffix[i0] - n_tail * std::log(x_min);
    return n_tail / s;
}

double continuous_ks(const std::vector<double>& sorted, size_t i0, double x_min, double beta) {
    size_t n = sorted.size();
    double n_tail = static_cast<double>(n - i0);
    double inv_ln_xmin = std::log(x_min);
    double ks = 0.0;
    for (size_t j = i0; j < n; ++j) {
        double cdf = 1.0 - std::exp(-beta * (std::log(sorted[j]) - inv_ln_xmin));
        double e_hi = static_cast<double>(j - i0 + 1) / n_tail;
        double e_lo = static_cast<double>(j - i0) / n_tail;
        ks = std::max(ks, std::max(std::abs(e_hi - cdf), std::abs(e_lo - cdf)));
    }
    return ks;
}

// Discrete zeta likelihood over integer values >= x_min, density exponent a:
//   l(a) = -N ln zeta(a, x_min) - a * sum ln x
// Concave in a; golden-section maximization.
double discrete_mle(double sum_ln_tail, double n_tail, double x_min) {
    auto neg_ll = [&](double a) {
        return n_tail * std::log(hurwitz_zeta(a, x_min)) + a * sum_ln_tail;
    };
    double lo = 1.0 + 1e-8, hi = 24.0;
    constexpr double phi = 0.6180339887498949;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = neg_ll(x1), f2 = neg_ll(x2);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = neg_ll(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = neg_ll(x2);
        }
        if (hi - lo < 1e-10) break;
    }
    return (lo + hi) / 2.0;  // density exponent a = alpha + 1
}

} // namespace

TailFit clauset_fit(std::vector<double> samples, Variant variant, const ClausetOptions& opts) {
    TailFit fit;
    fit.variant = variant;
    if (samples.empty()) return fit;
    if (variant == Variant::Discrete)
        for (double& x : samples) x = std::floor(x + 0.5);
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();
    if (samples.front() <= 0.0) throw std::invalid_argument("tail samples must be positive");
    if (samples.front() == samples.back()) return fit;  // degenerate: all equal
    if (variant == Variant::Discrete && samples.front() < 1.0)
        throw std::invalid_argument("discrete tail samples must be >= 1");

    Distinct d = distinct_values(samples);

    // suffix sums of ln x for O(1) tail statistics
    std::vector<double> sum_ln_suffix(n + 1, 0.0);
    for (size_t i = n; i-- > 0;) sum_ln_suffix[i] = sum_ln_suffix[i + 1] + std::log(samples[i]);

    std::vector<size_t> cands;
    if (opts.fixed_x_min) {
        // snap to the smallest distinct value >= fixed_x_min
        auto it = std::lower_bound(d.value.begin(), d.value.end(), *opts.fixed_x_min);
        if (it == d.value.end()) return fit;
        cands.push_back(static_cast<size_t>(it - d.value.begin()));
    } else {
        cands = candidate_indices(d.value.size(), opts.max_candidates);
    }

    double best_ks = std::numeric_limits<double>::infinity();
    for (size_t ci : cands) {
        double x_min = opts.fixed_x_min ? *opts.fixed_x_min : d.value[ci];
        size_t i0 = d.first_index[ci];
        size_t n_tail = n - i0;
        if (n_tail < opts.min_tail) continue;
        if (samples[i0] == samples[n - 1] && !opts.fixed_x_min) continue;  // zero spread

        double exponent, ks;
        if (variant == Variant::Continuous) {
            exponent = continuous_mle(sum_ln_suffix, i0, n, x_min);
            if (!(exponent > 0.0) || !std::isfinite(exponent)) continue;
            ks = continuous_ks(samples, i0, x_min, exponent);
        } else {
            double sum_ln_tail = sum_ln_suffix[i0];
            double a = discrete_mle(sum_ln_tail, static_cast<double>(n_tail), x_min);
            exponent = a - 1.0;
            // KS over distinct tail values
            double z = hurwitz_zeta(a, x_min);
            ks = 0.0;
            auto lo_it = std::lower_bound(d.value.begin(), d.value.end(), x_min);
            for (auto it = lo_it; it != d.value.end(); ++it) {
                size_t di = static_cast<size_t>(it - d.value.begin());
                size_t upto = (di + 1 < d.value.size()) ? d.first_index[di + 1] : n;
                double ecdf = static_cast<double>(upto - i0) / static_cast<double>(n_tail);
                double cdf = 1.0 - hurwitz_zeta(a, *it + 1.0) / z;
                ks = std::max(ks, std::abs(ecdf - cdf));
            }
        }
        if (ks < best_ks) {
            best_ks = ks;
            fit.available = true;
            fit.exponent = exponent;
            fit.x_min = x_min;
            fit.n_tail = n_tail;
            fit.ks = ks;
        }
    }
    return fit;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    size_t n = x.size();
    if (n != y.size() || n < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;  // constant column
    return sxy / std::sqrt(sxx * syy);
}

PredictionTest test_predictions(std::vector<PredictionRow> rows) {
    if (rows.size() < 3)
        throw std::invalid_argument("test_predictions: need at least 3 stocks");
    PredictionTest t;
    t.rows = std::move(rows);
    std::vector<double> delta, am1, bm1;
    for (const auto& r : t.rows) {
        delta.push_back(r.delta);
        am1.push_back(r.alpha - 1.0);
        bm1.push_back(r.beta - 1.0);
    }
    t.r_delta_alpha = pearson(delta, am1);
    t.r_delta_beta = pearson(delta, bm1);
    return t;
}

void write_prediction_scatter(const std::string& path, const PredictionTest& test) {
    csv::Writer out(path);
    out.raw_line("stock,delta,alpha_minus_1,beta_minus_1");
    for (const auto& r : test.rows) {
        out.field(r.stock).field(r.delta).field(r.alpha - 1.0).field(r.beta - 1.0);
        out.end_row();
    }
}

} // namespace srl::powerlaw
