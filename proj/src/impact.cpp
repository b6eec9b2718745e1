#include "srl/impact.hpp"
#include "srl/csv.hpp"
#include "srl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace srl::impact {

namespace {

struct ValidBins {
    std::vector<double> log_q;  // ln of bin center
    std::vector<double> y;      // conditional mean impact
};

ValidBins collect_valid(const BinnedImpact& b, long long min_count) {
    ValidBins v;
    for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
        if (b.count[k] > min_count) {
            v.log_q.push_back(std::log(BinnedImpact::center(k)));
            v.y.push_back(b.mean(k));
        }
    }
    return v;
}

double objective(const ValidBins& v, double log_c, double delta) {
    double s = 0.0;
    for (size_t k = 0; k < v.y.size(); ++k) {
        double model = std::exp(log_c + delta * v.log_q[k]);
        double r = v.y[k] / model - 1.0;
        s += r * r;
    }
    return s;
}

// 2-D Nelder-Mead; returns best point, sets converged on simplex collapse.
std::array<double, 2> nelder_mead(const ValidBins& v, std::array<double, 2> start,
                                  double tol, int max_iter, bool& converged) {
    constexpr int n = 2;
    std::array<std::array<double, 2>, 3> pts;
    std::array<double, 3> f;
    pts[0] = start;
    pts[1] = {start[0] + 0.25, start[1]};
    pts[2] = {start[0], start[1] + 0.1};
    for (int i = 0; i < 3; ++i) f[i] = objective(v, pts[i][0], pts[i][1]);

    converged = false;
    for (int it = 0; it < max_iter; ++it) {
        std::array<int, 3> ord{0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] < f[b]; });
        int lo = ord[0], mid = ord[1], hi = ord[2];

        double spread = 0.0;
        for (int d = 0; d < n; ++d)
            spread = std::max(spread, std::max(std::abs(pts[hi][d] - pts[lo][d]),
                                               std::abs(pts[mid][d] - pts[lo][d])));
        if (spread < tol) {
            converged = true;
            return pts[lo];
        }

        std::array<double, 2> centroid{};
        for (int d = 0; d < n; ++d) centroid[d] = (pts[lo][d] + pts[mid][d]) / 2.0;

        auto blend = [&](double t) {
            std::array<double, 2> p;
            for (int d = 0; d < n; ++d) p[d] = centroid[d] + t * (centroid[d] - pts[hi][d]);
            return p;
        };

        auto refl = blend(1.0);
        double fr = objective(v, refl[0], refl[1]);
        if (fr < f[lo]) {
            auto exp_ = blend(2.0);
            double fe = objective(v, exp_[0], exp_[1]);
            if (fe < fr) { pts[hi] = exp_; f[hi] = fe; }
            else { pts[hi] = refl; f[hi] = fr; }
        } else if (fr < f[mid]) {
            pts[hi] = refl;
            f[hi] = fr;
        } else {
            auto con = blend(fr < f[hi] ? 0.5 : -0.5);
            double fc = objective(v, con[0], con[1]);
            if (fc < std::min(fr, f[hi])) {
                pts[hi] = con;
                f[hi] = fc;
            } else {
                // shrink toward best
                for (int i : {mid, hi}) {
                    for (int d = 0; d < n; ++d) pts[i][d] = pts[lo][d] + 0.5 * (pts[i][d] - pts[lo][d]);
                    f[i] = objective(v, pts[i][0], pts[i][1]);
                }
            }
        }
    }
    std::array<int, 3> ord{0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] < f[b]; });
    return pts[ord[0]];
}

// Local polish on the relative-squares residuals r_k = y_k / m_k - 1 with
// parameters (log c, delta).
std::array<double, 2> gauss_newton(const ValidBins& v, std::array<double, 2> p) {
    for (int it = 0; it < 60; ++it) {
        double a11 = 0, a12 = 0, a22 = 0, g1 = 0, g2 = 0;
        for (size_t k = 0; k < v.y.size(); ++k) {
            double model = std::exp(p[0] + p[1] * v.log_q[k]);
            double r = v.y[k] / model - 1.0;
            double j1 = -(r + 1.0);             // d r / d log c
            double j2 = j1 * v.log_q[k];        // d r / d delta
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        double det = a11 * a22 - a12 * a12;
        if (std::abs(det) < 1e-300) break;
        double d1 = (a22 * g1 - a12 * g2) / det;
        double d2 = (a11 * g2 - a12 * g1) / det;
        double f0 = objective(v, p[0], p[1]);
        std::array<double, 2> cand{p[0] - d1, p[1] - d2};
        double f1 = objective(v, cand[0], cand[1]);
        // halve until it does not overshoot
        double step = 1.0;
        while (f1 > f0 && step > 1e-6) {
            step *= 0.5;
            cand = {p[0] - step * d1, p[1] - step * d2};
            f1 = objective(v, cand[0], cand[1]);
        }
        if (f1 > f0) break;
        double moved = std::max(std::abs(cand[0] - p[0]), std::abs(cand[1] - p[1]));
        p = cand;
        if (moved < 1e-13) break;
    }
    return p;
}

} // namespace

double relative_ls_objective(const BinnedImpact& binned, double c, double delta,
                             long long min_bin_count) {
    ValidBins v = collect_valid(binned, min_bin_count);
    return objective(v, std::log(c), delta);
}

PowerFit fit_power_law(const BinnedImpact& binned, const FitOptions& opts) {
    PowerFit fit;
    ValidBins v = collect_valid(binned, opts.min_bin_count);
    fit.n_bin = static_cast<int>(v.y.size());
    if (fit.n_bin < 2) return fit;
    bool any_positive = std::any_of(v.y.begin(), v.y.end(), [](double y) { return y > 0.0; });
    if (!any_positive) return fit;

    // init: OLS in log-log space on positive means
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n_pos = 0;
    for (size_t k = 0; k < v.y.size(); ++k) {
        if (v.y[k] <= 0.0) continue;
        double x = v.log_q[k], y = std::log(v.y[k]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n_pos;
    }
    std::array<double, 2> p{0.0, 0.5};
    if (n_pos >= 2) {
        double det = n_pos * sxx - sx * sx;
        if (std::abs(det) > 1e-12) {
            p[1] = (n_pos * sxy - sx * sy) / det;
            p[0] = (sy - p[1] * sx) / n_pos;
        }
    } else {
        // single positive bin: pin delta at 1/2 through it
        for (size_t k = 0; k < v.y.size(); ++k)
            if (v.y[k] > 0.0) p[0] = std::log(v.y[k]) - 0.5 * v.log_q[k];
    }

    bool nm_converged = false;
    p = nelder_mead(v, p, opts.param_tol, opts.max_iterations, nm_converged);
    p = gauss_newton(v, p);

    fit.available = true;
    fit.converged = nm_converged;
    fit.c = std::exp(p[0]);
    fit.delta = p[1];
    fit.objective = objective(v, p[0], p[1]);
    return fit;
}

std::optional<double> fit_prefactor_sqrt(const BinnedImpact& binned, long long min_bin_count) {
    // min over c of sum_k (u_k / c - 1)^2 with u_k = y_k / sqrt(q_k)
    double su = 0, suu = 0;
    int n = 0;
    for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
        if (binned.count[k] <= min_bin_count) continue;
        double u = binned.mean(k) / std::sqrt(BinnedImpact::center(k));
        su += u;
        suu += u * u;
        ++n;
    }
    if (n == 0 || su <= 0.0) return std::nullopt;
    return suu / su;
}

std::vector<ImpactSample> compute_impact_samples(const std::vector<Metaorder>& metaorders,
                                                 const StatsTable& stats,
                                                 const Stream& stream,
                                                 DropCounters& drops) {
    std::vector<ImpactSample> out;
    out.reserve(metaorders.size());
    for (const auto& m : metaorders) {
        metaorder::DayKey key{m.stock, m.day};
        auto st = stats.find(key);
        auto day = stream.find(key);
        if (st == stats.end() || day == stream.end() || !st->second.usable()) {
            ++drops.missing_stats;
            continue;
        }
        const auto& recs = day->second;
        if (m.t_end >= static_cast<int>(recs.size())) {
            ++drops.missing_post_midprice;  // no midprice after the last child
            continue;
        }
        const double m_start = recs[m.t_start - 1].midprice;  // just before t_start
        const double m_after = recs[m.t_end].midprice;        // just before t_end + 1
        ImpactSample s;
        s.stock = m.stock;
        s.trader = m.trader;
        s.day = m.day;
        s.r = m.r;
        s.q = static_cast<double>(std::llabs(m.Q)) / st->second.V_D;
        s.impact = m.sign * (m_after - m_start) / st->second.sigma_D;
        s.T = m.T;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ImpactSample> filter_samples(const std::vector<ImpactSample>& samples,
                                         double min_T_seconds,
                                         std::optional<HorizonWindow> window) {
    std::vector<ImpactSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.T < min_T_seconds) continue;
        if (window && !(s.T >= window->lo && s.T < window->hi)) continue;
        out.push_back(s);
    }
    return out;
}

BinnedImpact bin_samples(const std::vector<ImpactSample>& samples) {
    BinnedImpact b;
    for (const auto& s : samples) b.add(s.q, s.impact);
    return b;
}

BinnedImpact bin_samples(std::span<const double> q, std::span<const double> impact) {
    BinnedImpact b;
    for (size_t i = 0; i < q.size(); ++i) b.add(q[i], impact[i]);
    return b;
}

uint64_t estimator_fingerprint(const AnalysisConfig& cfg) {
    char buf[256];
    int n = std::snprintf(buf, sizeof buf, "%.9g|%.9g|%.9g|%lld|%lld|%lld|%d|%.3g",
                          cfg.min_horizon_sec,
                          cfg.horizon_window ? cfg.horizon_window->lo : -1.0,
                          cfg.horizon_window ? cfg.horizon_window->hi : -1.0,
                          cfg.valid_bin_min_count, cfg.liquid_min_metaorders,
                          cfg.active_min_metaorders, cfg.active_min_bins, cfg.solver_tol);
    return fnv1a64(std::string_view(buf, static_cast<size_t>(n)));
}

FitSummary summarize(std::span<const double> values) {
    FitSummary s;
    s.n = values.size();
    if (s.n == 0) return s;
    double sum = std::accumulate(values.begin(), values.end(), 0.0);
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n));
    s.sem = s.n > 1 ? s.stddev / std::sqrt(static_cast<double>(s.n)) : 0.0;
    return s;
}

namespace {

FitTable fit_grouped(std::map<std::string, BinnedImpact>&& groups,
                     const std::vector<std::string>& skipped, const AnalysisConfig& cfg,
                     int min_bins_required) {
    FitTable table;
    table.skipped = skipped;
    table.fingerprint = estimator_fingerprint(cfg);
    std::vector<double> deltas;
    for (auto& [entity, binned] : groups) {
        PowerFit fit = fit_power_law(binned, cfg.fit_options());
        if (min_bins_required > 0 && fit.n_bin <= min_bins_required) {
            table.skipped.push_back(entity);
            continue;
        }
        if (fit.available) deltas.push_back(fit.delta);
        table.fits.push_back({entity, fit, binned});
    }
    table.delta_summary = summarize(deltas);
    return table;
}

} // namespace

FitTable fit_all_stocks(const std::vector<ImpactSample>& samples,
                        const StockCatalog& catalog, const AnalysisConfig& cfg) {
    std::map<std::string, BinnedImpact> groups;
    std::vector<std::string> skipped;
    for (const auto& [stock, m_s] : catalog.metaorders_per_stock) {
        if (m_s > cfg.liquid_min_metaorders) groups.emplace(stock, BinnedImpact{});
        else skipped.push_back(stock);
    }
    for (const auto& s : samples) {
        auto it = groups.find(s.stock);
        if (it != groups.end()) it->second.add(s.q, s.impact);
    }
    return fit_grouped(std::move(groups), skipped, cfg, 0);
}

FitTable fit_all_traders(const std::vector<ImpactSample>& samples,
                         const StockCatalog& catalog, const AnalysisConfig& cfg) {
    std::map<std::string, BinnedImpact> groups;
    std::vector<std::string> skipped;
    for (const auto& [key, m_si] : catalog.per_trader) {
        std::string entity = key.first + ":" + key.second;
        if (m_si >= cfg.active_min_metaorders) groups.emplace(std::move(entity), BinnedImpact{});
        else skipped.push_back(entity);
    }
    for (const auto& s : samples) {
        auto it = groups.find(s.stock + ":" + s.trader);
        if (it != groups.end()) it->second.add(s.q, s.impact);
    }
    return fit_grouped(std::move(groups), skipped, cfg, cfg.active_min_bins);
}

ScalingCurve aggregate_scaling(const std::vector<EntityFit>& entities, long long min_bin_count) {
    ScalingCurve curve;
    std::array<double, BinnedImpact::kNumBins> sum{}, sum_sq{};
    for (int k = 0; k < BinnedImpact::kNumBins; ++k)
        curve.x[k] = std::sqrt(BinnedImpact::center(k));
    for (const auto& e : entities) {
        auto c = fit_prefactor_sqrt(e.binned, min_bin_count);
        if (!c) {
            ++curve.skipped_entities;
            continue;
        }
        for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
            if (e.binned.count[k] <= min_bin_count) continue;
            double phi = e.binned.mean(k) / *c;
            sum[k] += phi;
            sum_sq[k] += phi * phi;
            ++curve.count[k];
        }
    }
    for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
        if (curve.count[k] == 0) continue;
        double n = static_cast<double>(curve.count[k]);
        curve.phi_avg[k] = sum[k] / n;
        if (curve.count[k] > 1) {
            double var = (sum_sq[k] - sum[k] * sum[k] / n) / (n - 1.0);
            curve.sem[k] = std::sqrt(std::max(var, 0.0) / n);
        }
    }
    return curve;
}

void write_fit_table(const std::string& path, const FitTable& table) {
    csv::Writer out(path);
    out.raw_line("entity,delta,c,n_bin,objective,converged");
    for (const auto& e : table.fits) {
        out.field(e.entity).field(e.fit.delta).field(e.fit.c).field(e.fit.n_bin)
           .field(e.fit.objective).field(std::string_view(e.fit.converged ? "1" : "0"));
        out.end_row();
    }
}

void write_binned(const std::string& path, const BinnedImpact& binned) {
    csv::Writer out(path);
    out.raw_line("k,q_center,mean_impact,count,sem");
    for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
        out.field(k).field(BinnedImpact::center(k))
           .field(binned.count[k] > 0 ? binned.mean(k) : 0.0)
           .field(binned.count[k]).field(binned.sem(k));
        out.end_row();
    }
}

void write_scaling_curve(const std::string& path, const ScalingCurve& curve) {
    csv::Writer out(path);
    out.raw_line("x,phi_avg,count,sem");
    for (int k = 0; k < BinnedImpact::kNumBins; ++k) {
        if (curve.count[k] == 0) continue;
        out.field(curve.x[k]).field(curve.phi_avg[k]).field(curve.count[k]).field(curve.sem[k]);
        out.end_row();
    }
}

} // namespace srl::impact
