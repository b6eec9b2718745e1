#include "srl/nullmodel.hpp"
#include "srl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <thread>

namespace srl::nullmodel {

std::vector<int8_t> shuffle_signs(const StockSchedule& schedule, SplitMix64& rng) {
    std::vector<int8_t> signs;
    signs.reserve(schedule.metas.size());
    for (const auto& m : schedule.metas) signs.push_back(m.sign);
    for (size_t i = signs.size(); i > 1; --i)
        std::swap(signs[i - 1], signs[rng.below(i)]);
    return signs;
}

std::vector<double> simulate_prices(const ScheduleDay& day, std::span<const int8_t> signs,
                                    double c, double noise_scale, double m0, SplitMix64& rng) {
    std::vector<double> m(day.ticks.size() + 1);
    m[0] = m0;
    for (size_t k = 0; k < day.ticks.size(); ++k) {
        const auto& t = day.ticks[k];
        double dm = c * day.sigma_D * static_cast<double>(signs[t.meta]) * t.sqrt_dq;
        if (noise_scale != 0.0)
            dm += noise_scale * day.sigma_D * t.noise_sd * rng.gaussian();
        m[k + 1] = m[k] + dm;
    }
    return m;
}

std::vector<TrialSample> simulate_stock(const StockSchedule& schedule,
                                        std::span<const int8_t> signs,
                                        double noise_scale, SplitMix64& rng) {
    std::vector<TrialSample> out;
    out.reserve(schedule.metas.size());
    // dimensionless paths: one per day, sigma_D = 1, m0 = 0
    std::vector<double> md;
    size_t meta_idx = 0;
    for (size_t di = 0; di < schedule.days.size(); ++di) {
        const auto& day = schedule.days[di];
        md.assign(day.ticks.size() + 1, 0.0);
        for (size_t k = 0; k < day.ticks.size(); ++k) {
            const auto& t = day.ticks[k];
            double dm = schedule.c * static_cast<double>(signs[t.meta]) * t.sqrt_dq;
            if (noise_scale != 0.0) dm += noise_scale * t.noise_sd * rng.gaussian();
            md[k + 1] = md[k] + dm;
        }
        while (meta_idx < schedule.metas.size()) {
            const auto& m = schedule.metas[meta_idx];
            if (static_cast<size_t>(m.day) != di) break;
            double impact = static_cast<double>(signs[meta_idx]) *
                            (md[m.last_tick + 1] - md[m.first_tick]);
            out.push_back({m.q, impact, m.T, m.trader});
            ++meta_idx;
        }
    }
    return out;
}

StockSchedule synth_schedule(const SynthConfig& cfg, size_t stock_index) {
    if (cfg.metaorders_per_day < 1 || cfg.metaorders_per_stock < 1 || cfg.traders_per_stock < 1)
        throw std::invalid_argument("synth_schedule: counts must be positive");
    if (cfg.l_min < 1 || cfg.l_max < cfg.l_min)
        throw std::invalid_argument("synth_schedule: bad run-length range");
    if (cfg.min_duration_sec <= 0.0 || cfg.max_duration_sec < cfg.min_duration_sec)
        throw std::invalid_argument("synth_schedule: bad duration range");
    constexpr double kSessionBudget = 14400.0;  // continuous trading seconds per day
    constexpr double kGap = 1.0;                // seconds between metaorders
    if (cfg.metaorders_per_day * (cfg.min_duration_sec + kGap) > kSessionBudget)
        throw std::invalid_argument("synth_schedule: day cannot hold metaorders_per_day");

    StockSchedule s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "S%04zu", stock_index);
    s.stock = buf;
    s.c = cfg.c;
    for (int i = 0; i < cfg.traders_per_stock; ++i) {
        std::snprintf(buf, sizeof(buf), "T%03d", i);
        s.traders.push_back(buf);
    }

    SplitMix64 rng(derive_stream(cfg.seed, "synth:" + s.stock, stock_index));
    std::vector<int8_t> last_sign(cfg.traders_per_stock, 0);

    long long remaining = cfg.metaorders_per_stock;
    int day_no = 0;
    while (remaining > 0) {
        ScheduleDay day;
        std::snprintf(buf, sizeof(buf), "D%06d", day_no);
        day.day = buf;
        day.sigma_D = cfg.sigma_D;
        int n_today = static_cast<int>(std::min<long long>(remaining, cfg.metaorders_per_day));
        std::fill(last_sign.begin(), last_sign.end(), 0);

        double tau = 0.0;       // session clock, lunch removed
        double prev_phys = 0.0; // for the diffusion increments
        for (int j = 0; j < n_today; ++j) {
            ScheduleMeta meta;
            meta.day = day_no;
            meta.trader = static_cast<int32_t>(j % cfg.traders_per_stock);
            int8_t prev = last_sign[meta.trader];
            meta.sign = prev == 0 ? (rng.uniform() < 0.5 ? int8_t{-1} : int8_t{+1})
                                  : static_cast<int8_t>(-prev);
            last_sign[meta.trader] = meta.sign;

            double u = rng.uniform_pos();
            int L = static_cast<int>(std::floor(cfg.l_min * std::pow(u, -1.0 / cfg.alpha)));
            L = std::clamp(L, cfg.l_min, cfg.l_max);

            if (cfg.q_mode == SynthConfig::QMode::BinCenters) {
                int k = cfg.k_min + static_cast<int>(rng.below(
                            static_cast<uint64_t>(cfg.k_max - cfg.k_min + 1)));
                meta.q = impact::BinnedImpact::center(k);
            } else {
                double x_min = cfg.q_scale > 0.0
                                   ? cfg.q_scale
                                   : 1.0 / (3.0 * static_cast<double>(cfg.metaorders_per_day));
                meta.q = x_min * std::pow(rng.uniform_pos(), -1.0 / cfg.beta);
            }

            // duration capped so every remaining metaorder still fits
            double reserve = (n_today - 1 - j) * (cfg.min_duration_sec + kGap) + kGap;
            double d_max = std::min(cfg.max_duration_sec, kSessionBudget - tau - reserve);
            double d = (L == 1) ? 0.0
                                : cfg.min_duration_sec *
                                      std::pow(d_max / cfg.min_duration_sec, rng.uniform());
            meta.T = d;
            meta.first_tick = static_cast<int32_t>(day.ticks.size());
            for (int ch = 0; ch < L; ++ch) {
                double t_sess = tau + (L == 1 ? 0.0 : d * ch / (L - 1));
                double phys = t_sess < 9000.0 ? t_sess : t_sess + 3600.0;  // lunch gap
                double q_prev = meta.q * ch / L;
                double q_cur = meta.q * (ch + 1) / L;
                ScheduleTick tick;
                tick.noise_sd = std::sqrt(std::max(phys - prev_phys, 0.0) / 18000.0);
                tick.sqrt_dq = std::sqrt(q_cur) - std::sqrt(q_prev);
                tick.meta = static_cast<int32_t>(s.metas.size());
                day.ticks.push_back(tick);
                prev_phys = phys;
            }
            meta.last_tick = static_cast<int32_t>(day.ticks.size()) - 1;
            s.metas.push_back(meta);
            tau += d + kGap;
        }
        s.days.push_back(std::move(day));
        remaining -= n_today;
        ++day_no;
    }
    return s;
}

std::vector<StockSchedule> schedules_from_data(const orderflow::Stream& stream,
                                               const metaorder::ExtractionResult& extraction,
                                               const metaorder::StockCatalog& catalog,
                                               const impact::AnalysisConfig& cfg) {
    // per-stock prefactor from the one-parameter fit on the measured samples
    impact::DropCounters drops;
    auto samples = impact::compute_impact_samples(extraction.metaorders, extraction.stats,
                                                  stream, drops);
    samples = impact::filter_samples(samples, cfg.min_horizon_sec, cfg.horizon_window);
    std::map<std::string, impact::BinnedImpact> binned;
    for (const auto& sm : samples)
        if (catalog.liquid(sm.stock)) binned[sm.stock].add(sm.q, sm.impact);

    std::vector<StockSchedule> out;
    std::map<std::string, size_t> index;
    std::map<std::string, std::map<std::string, int32_t>> trader_index;
    for (const auto& [stock, b] : binned) {
        StockSchedule s;
        s.stock = stock;
        auto c = impact::fit_prefactor_sqrt(b, cfg.valid_bin_min_count);
        if (!c) c = impact::fit_prefactor_sqrt(b, 0);
        s.c = (c && *c > 0.0) ? *c : 1.0;
        index[stock] = out.size();
        out.push_back(std::move(s));
    }

    for (const auto& [key, recs] : stream) {
        auto it = index.find(key.stock);
        if (it == index.end()) continue;
        auto st = extraction.stats.find(key);
        if (st == extraction.stats.end() || !st->second.usable()) continue;
        StockSchedule& s = out[it->second];
        const double V_D = st->second.V_D;

        ScheduleDay day;
        day.day = key.day;
        day.sigma_D = st->second.sigma_D;
        day.ticks.reserve(recs.size());

        struct RunState {
            int32_t meta = -1;
            int sign = 0;
            long long cum = 0;
        };
        std::map<std::string, RunState> runs;
        double prev_phys = 0.0;
        std::vector<double> tick_time;
        tick_time.reserve(recs.size());
        const size_t day_first_meta = s.metas.size();
        auto& tindex = trader_index[key.stock];
        for (const auto& rec : recs) {
            RunState& rs = runs[rec.trader];
            if (rs.sign != rec.sign) {
                auto [ti, inserted] = tindex.try_emplace(
                    rec.trader, static_cast<int32_t>(s.traders.size()));
                if (inserted) s.traders.push_back(rec.trader);
                ScheduleMeta meta;
                meta.day = static_cast<int32_t>(s.days.size());
                meta.trader = ti->second;
                meta.sign = static_cast<int8_t>(rec.sign);
                meta.first_tick = static_cast<int32_t>(day.ticks.size());
                rs.meta = static_cast<int32_t>(s.metas.size());
                rs.sign = rec.sign;
                rs.cum = 0;
                s.metas.push_back(meta);
            }
            ScheduleMeta& meta = s.metas[rs.meta];
            double q_prev = static_cast<double>(rs.cum) / V_D;
            rs.cum += rec.volume;
            double q_cur = static_cast<double>(rs.cum) / V_D;
            ScheduleTick tick;
            tick.noise_sd = std::sqrt(std::max(rec.phys_time - prev_phys, 0.0) / 18000.0);
            tick.sqrt_dq = std::sqrt(q_cur) - std::sqrt(q_prev);
            tick.meta = rs.meta;
            meta.last_tick = static_cast<int32_t>(day.ticks.size());
            meta.q = q_cur;
            day.ticks.push_back(tick);
            tick_time.push_back(rec.phys_time);
            prev_phys = rec.phys_time;
        }
        for (size_t mi = day_first_meta; mi < s.metas.size(); ++mi) {
            ScheduleMeta& meta = s.metas[mi];
            meta.T = tick_time[meta.last_tick] - tick_time[meta.first_tick];
        }
        s.days.push_back(std::move(day));
    }
    return out;
}

namespace {

struct StockOutcome {
    std::vector<double> delta_by_trial;                // NaN when unavailable
    std::vector<std::vector<double>> trader_by_trial;  // trader deltas per trial
};

void run_one_stock(const StockSchedule& sched, const McConfig& cfg, StockOutcome& out) {
    const auto& an = cfg.analysis;
    const auto fit_opts = an.fit_options();
    const bool liquid =
        static_cast<long long>(sched.metas.size()) > an.liquid_min_metaorders;

    std::vector<long long> per_trader(sched.traders.size(), 0);
    for (const auto& m : sched.metas) ++per_trader[m.trader];
    std::vector<int> active;
    for (size_t i = 0; i < per_trader.size(); ++i)
        if (per_trader[i] >= an.active_min_metaorders) active.push_back(static_cast<int>(i));

    out.delta_by_trial.assign(cfg.n_trials, std::numeric_limits<double>::quiet_NaN());
    out.trader_by_trial.assign(cfg.n_trials, {});
    if (!liquid && active.empty()) return;

    std::vector<int> trader_slot(sched.traders.size(), -1);
    for (size_t i = 0; i < active.size(); ++i) trader_slot[active[i]] = static_cast<int>(i);

    for (int trial = 0; trial < cfg.n_trials; ++trial) {
        SplitMix64 rng(derive_stream(cfg.seed, "mc:" + sched.stock,
                                     static_cast<uint64_t>(trial)));
        auto signs = shuffle_signs(sched, rng);
        auto samples = simulate_stock(sched, signs, cfg.noise_scale, rng);

        impact::BinnedImpact stock_bins;
        std::vector<impact::BinnedImpact> trader_bins(active.size());
        for (const auto& sm : samples) {
            if (sm.T < an.min_horizon_sec) continue;
            if (an.horizon_window &&
                (sm.T < an.horizon_window->lo || sm.T >= an.horizon_window->hi))
                continue;
            if (liquid) stock_bins.add(sm.q, sm.impact);
            int slot = trader_slot[sm.trader];
            if (slot >= 0) trader_bins[slot].add(sm.q, sm.impact);
        }
        if (liquid) {
            auto fit = impact::fit_power_law(stock_bins, fit_opts);
            if (fit.available) out.delta_by_trial[trial] = fit.delta;
        }
        for (size_t i = 0; i < active.size(); ++i) {
            auto fit = impact::fit_power_law(trader_bins[i], fit_opts);
            if (fit.available && fit.n_bin > an.active_min_bins)
                out.trader_by_trial[trial].push_back(fit.delta);
        }
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_se(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

} // namespace

MonteCarloSummary run_monte_carlo(size_t n_stocks, const ScheduleProvider& provider,
                                  const McConfig& cfg) {
    if (cfg.n_trials < 1) throw std::invalid_argument("run_monte_carlo: n_trials < 1");
    std::vector<StockOutcome> outcomes(n_stocks);
    std::vector<std::string> names(n_stocks);

    int n_threads = std::max(cfg.threads, 1);
    n_threads = static_cast<int>(std::min<size_t>(n_threads, std::max<size_t>(n_stocks, 1)));
    auto worker = [&](size_t t0) {
        for (size_t i = t0; i < n_stocks; i += static_cast<size_t>(n_threads)) {
            StockSchedule sched = provider(i);
            names[i] = sched.stock;
            run_one_stock(sched, cfg, outcomes[i]);
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, static_cast<size_t>(t));
        for (auto& th : pool) th.join();
    }

    MonteCarloSummary mc;
    mc.n_trials = cfg.n_trials;
    mc.stocks = names;
    mc.estimator_fingerprint = impact::estimator_fingerprint(cfg.analysis);
    mc.per_trial_delta.assign(cfg.n_trials,
                              std::vector<double>(n_stocks,
                                                  std::numeric_limits<double>::quiet_NaN()));

    std::vector<double> trial_var;  // per-trial population variance, stock level
    for (int trial = 0; trial < cfg.n_trials; ++trial) {
        double s = 0.0, s2 = 0.0;
        long long n = 0;
        double ts = 0.0, ts2 = 0.0;
        long long tn = 0;
        for (size_t i = 0; i < n_stocks; ++i) {
            double d = outcomes[i].delta_by_trial[trial];
            mc.per_trial_delta[trial][i] = d;
            if (!std::isnan(d)) {
                s += d;
                s2 += d * d;
                ++n;
            }
            for (double td : outcomes[i].trader_by_trial[trial]) {
                ts += td;
                ts2 += td * td;
                ++tn;
            }
        }
        if (n > 0) {
            double m = s / static_cast<double>(n);
            mc.trial_mean_delta.push_back(m);
            double var = s2 / static_cast<double>(n) - m * m;
            trial_var.push_back(std::max(var, 0.0));
            mc.trial_sigma_delta.push_back(std::sqrt(std::max(var, 0.0)));
        } else {
            ++mc.dropped_trials;
        }
        if (tn > 0) {
            double m = ts / static_cast<double>(tn);
            mc.trial_trader_mean_delta.push_back(m);
            double var = ts2 / static_cast<double>(tn) - m * m;
            mc.trial_trader_sigma.push_back(std::sqrt(std::max(var, 0.0)));
        }
    }

    if (!mc.trial_mean_delta.empty()) {
        mc.mean_delta = mean_of(mc.trial_mean_delta);
        mc.se_mean_delta = sample_se(mc.trial_mean_delta);
        mc.mean_sigma_delta = std::sqrt(mean_of(trial_var));
        mc.se_sigma_delta = sample_se(mc.trial_sigma_delta);
        mc.bias = mc.mean_delta - 0.5;
    }
    if (!mc.trial_trader_mean_delta.empty()) {
        mc.trader_level = true;
        mc.trader_mean_delta = mean_of(mc.trial_trader_mean_delta);
        mc.trader_se_mean_delta = sample_se(mc.trial_trader_mean_delta);
        std::vector<double> tv(mc.trial_trader_sigma.size());
        for (size_t i = 0; i < tv.size(); ++i)
            tv[i] = mc.trial_trader_sigma[i] * mc.trial_trader_sigma[i];
        mc.trader_mean_sigma = std::sqrt(mean_of(tv));
        mc.trader_se_sigma = sample_se(mc.trial_trader_sigma);
    }
    return mc;
}

MonteCarloSummary run_monte_carlo(const std::vector<StockSchedule>& schedules,
                                  const McConfig& cfg) {
    return run_monte_carlo(schedules.size(),
                           [&](size_t i) { return schedules[i]; }, cfg);
}

BiasCorrected bias_correct(double mean_delta, double sem, uint64_t fit_fingerprint,
                           const MonteCarloSummary& mc) {
    if (fit_fingerprint != mc.estimator_fingerprint)
        throw std::invalid_argument(
            "bias_correct: estimator configuration mismatch between fit and null model");
    BiasCorrected b;
    b.mean = mean_delta - mc.bias;
    b.se = std::sqrt(sem * sem + mc.se_mean_delta * mc.se_mean_delta);
    return b;
}

void write_mc_summary(const std::string& path, const MonteCarloSummary& mc,
                      const McConfig& cfg) {
    csv::Writer out(path);
    out.raw_line("key,value");
    auto kv = [&](const char* k, double v) { out.field(k).field(v).end_row(); };
    kv("n_trials", mc.n_trials);
    kv("n_stocks", static_cast<double>(mc.stocks.size()));
    kv("dropped_trials", static_cast<double>(mc.dropped_trials));
    kv("noise_scale", cfg.noise_scale);
    kv("seed", static_cast<double>(cfg.seed));
    kv("mean_delta", mc.mean_delta);
    kv("se_mean_delta", mc.se_mean_delta);
    kv("mean_sigma_delta", mc.mean_sigma_delta);
    kv("se_sigma_delta", mc.se_sigma_delta);
    kv("bias", mc.bias);
    kv("trader_level", mc.trader_level ? 1.0 : 0.0);
    if (mc.trader_level) {
        kv("trader_mean_delta", mc.trader_mean_delta);
        kv("trader_se_mean_delta", mc.trader_se_mean_delta);
        kv("trader_mean_sigma", mc.trader_mean_sigma);
        kv("trader_se_sigma", mc.trader_se_sigma);
    }
    out.field("estimator_fingerprint").field(std::to_string(mc.estimator_fingerprint));
    out.end_row();
}

void write_mc_trials(const std::string& path, const MonteCarloSummary& mc) {
    csv::Writer out(path);
    out.raw_line("trial,stock,delta");
    for (size_t l = 0; l < mc.per_trial_delta.size(); ++l)
        for (size_t i = 0; i < mc.stocks.size(); ++i) {
            double d = mc.per_trial_delta[l][i];
            if (std::isnan(d)) continue;
            out.field(static_cast<long long>(l)).field(mc.stocks[i]).field(d);
            out.end_row();
        }
}

} // namespace srl::nullmodel
