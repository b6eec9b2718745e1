#include "srl/report.hpp"
#include "srl/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fs = std::filesystem;

namespace srl::report {

const char* kCodeVersion = "0.1.0";

Histogram make_histogram(std::span<const double> values, double lo, double hi, double width) {
    if (!(hi > lo)) throw std::invalid_argument("histogram: hi must exceed lo");
    if (!(width > 0.0)) throw std::invalid_argument("histogram: width must be positive");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.width = width;
    h.counts.assign(static_cast<size_t>(std::ceil((hi - lo) / width)), 0);
    double sum = 0.0, sum_sq = 0.0;
    for (double x : values) {
        if (x < lo) {
            ++h.below;
            continue;
        }
        if (x >= hi) {
            ++h.above;
            continue;
        }
        size_t k = static_cast<size_t>((x - lo) / width);
        if (k >= h.counts.size()) k = h.counts.size() - 1;  // fp edge at hi
        ++h.counts[k];
        ++h.n_in;
        sum += x;
        sum_sq += x * x;
    }
    if (h.n_in > 0) {
        double n = static_cast<double>(h.n_in);
        h.mean = sum / n;
        if (h.n_in > 1) {
            double var = (sum_sq - sum * sum / n) / (n - 1.0);
            h.stddev = std::sqrt(std::max(var, 0.0));
            h.sem = h.stddev / std::sqrt(n);
        }
    }
    return h;
}

void write_histogram(const std::string& path, const Histogram& h) {
    csv::Writer out(path);
    out.raw_line("row,lo,hi,value");
    for (size_t k = 0; k < h.counts.size(); ++k) {
        out.field("bin").field(h.lo + h.width * static_cast<double>(k));
        out.field(std::min(h.lo + h.width * static_cast<double>(k + 1), h.hi));
        out.field(h.counts[k]);
        out.end_row();
    }
    out.field("below").field("").field("").field(h.below).end_row();
    out.field("above").field("").field("").field(h.above).end_row();
    out.field("n_in").field("").field("").field(h.n_in).end_row();
    out.field("mean").field("").field("").field(h.mean).end_row();
    out.field("stddev").field("").field("").field(h.stddev).end_row();
    out.field("sem").field("").field("").field(h.sem).end_row();
}

orderflow::Stream apply_splits(const orderflow::Stream& stream, const SplitConfig& cfg) {
    orderflow::Stream out;
    for (const auto& [key, recs] : stream) {
        for (const auto& sr : cfg.splits) {
            if (key.day < sr.first || key.day > sr.last) continue;
            orderflow::DayKey nk{key.stock + sr.suffix, key.day};
            auto& dst = out[nk];
            dst = recs;
            for (auto& r : dst) r.stock = nk.stock;
            break;  // ranges are disjoint; first match wins
        }
    }
    return out;
}

std::vector<SplitSummary> crossvalidate(const orderflow::Stream& stream,
                                        const SplitConfig& splits,
                                        const impact::AnalysisConfig& cfg) {
    std::vector<SplitSummary> out;
    for (const auto& sr : splits.splits) {
        SplitConfig one;
        one.splits = {sr};
        orderflow::Stream half = apply_splits(stream, one);
        auto extraction = metaorder::extract_all(half);
        auto catalog = metaorder::build_catalog(extraction.metaorders,
                                                cfg.liquid_min_metaorders);
        impact::DropCounters drops;
        auto samples = impact::compute_impact_samples(extraction.metaorders,
                                                      extraction.stats, half, drops);
        samples = impact::filter_samples(samples, cfg.min_horizon_sec, cfg.horizon_window);
        auto fits = impact::fit_all_stocks(samples, catalog, cfg);
        SplitSummary s;
        s.range = sr;
        s.deltas = fits.delta_summary;
        s.n_stocks = fits.fits.size();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<impact::HorizonWindow> default_horizon_windows() {
    return {{60.0, 600.0}, {600.0, 1800.0}, {1800.0, 3600.0}, {3600.0, 18000.0}};
}

std::vector<HorizonResult> horizon_robustness(const std::vector<impact::ImpactSample>& samples,
                                              const metaorder::StockCatalog& catalog,
                                              const impact::AnalysisConfig& cfg,
                                              long long min_samples) {
    std::vector<HorizonResult> out;
    for (const auto& w : default_horizon_windows()) {
        std::map<std::string, std::vector<const impact::ImpactSample*>> per_stock;
        for (const auto& s : samples) {
            if (s.T < w.lo || s.T >= w.hi) continue;
            if (!catalog.liquid(s.stock)) continue;
            per_stock[s.stock].push_back(&s);
        }
        HorizonResult hr;
        hr.window = w;
        std::vector<double> deltas;
        for (const auto& [stock, ptrs] : per_stock) {
            if (static_cast<long long>(ptrs.size()) <= min_samples) continue;
            impact::BinnedImpact b;
            for (const auto* p : ptrs) b.add(p->q, p->impact);
            auto fit = impact::fit_power_law(b, cfg.fit_options());
            if (!fit.available) continue;
            deltas.push_back(fit.delta);
            ++hr.n_stocks;
            hr.n_samples += static_cast<long long>(ptrs.size());
        }
        hr.deltas = impact::summarize(deltas);
        out.push_back(std::move(hr));
    }
    return out;
}

void write_split_summaries(const std::string& path, const std::vector<SplitSummary>& rows) {
    csv::Writer out(path);
    out.raw_line("first_day,last_day,suffix,n_stocks,mean_delta,stddev_delta,sem_delta");
    for (const auto& r : rows) {
        out.field(r.range.first).field(r.range.last).field(r.range.suffix);
        out.field(r.n_stocks).field(r.deltas.mean).field(r.deltas.stddev).field(r.deltas.sem);
        out.end_row();
    }
}

void write_horizon_results(const std::string& path, const std::vector<HorizonResult>& rows) {
    csv::Writer out(path);
    out.raw_line("t_lo_sec,t_hi_sec,n_stocks,n_samples,mean_delta,stddev_delta,sem_delta");
    for (const auto& r : rows) {
        out.field(r.window.lo).field(r.window.hi).field(r.n_stocks).field(r.n_samples);
        out.field(r.deltas.mean).field(r.deltas.stddev).field(r.deltas.sem);
        out.end_row();
    }
}

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// entity names become file names in the binned/ directory
std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '/' || c == ':' || c == '\\') c = '_';
    return out;
}

uint64_t digest_config(const PipelineConfig& cfg) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "min_horizon=%.17g;win=%d,%.17g,%.17g;bin_min=%lld;liquid=%lld;"
                  "active=%lld,%d;tol=%.17g;splits=%d;horizon=%d,%lld;mc=%d,%d,%.17g;"
                  "seed=%llu",
                  cfg.analysis.min_horizon_sec, cfg.analysis.horizon_window ? 1 : 0,
                  cfg.analysis.horizon_window ? cfg.analysis.horizon_window->lo : 0.0,
                  cfg.analysis.horizon_window ? cfg.analysis.horizon_window->hi : 0.0,
                  cfg.analysis.valid_bin_min_count, cfg.analysis.liquid_min_metaorders,
                  cfg.analysis.active_min_metaorders, cfg.analysis.active_min_bins,
                  cfg.analysis.solver_tol, cfg.run_splits ? 1 : 0, cfg.run_horizon ? 1 : 0,
                  cfg.horizon_min_samples, cfg.run_mc ? 1 : 0, cfg.mc_trials,
                  cfg.mc_noise_scale, static_cast<unsigned long long>(cfg.seed));
    return fnv1a64(buf);
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw std::invalid_argument("pipeline: out_dir required");
    fs::create_directories(cfg.out_dir);
    fs::remove(join_path(cfg.out_dir, "FAILED"));

    std::string stage = "init";
    auto fail = [&](const std::exception& e) {
        std::ofstream marker(join_path(cfg.out_dir, "FAILED"));
        marker << "stage: " << stage << "\n" << e.what() << "\n";
    };

    PipelineResult result;
    try {
        // --- input -------------------------------------------------------
        stage = "input";
        orderflow::FlagTable flags;
        if (!cfg.flags_path.empty()) flags = orderflow::read_day_flags(cfg.flags_path);
        orderflow::Stream stream;
        size_t stream_records = 0;
        if (!cfg.events_path.empty()) {
            orderflow::IngestReport irep;
            auto events = orderflow::ingest_events(cfg.events_path, cfg.event_format, irep);
            auto desks = orderflow::DeskMap::build(events);
            orderflow::write_desk_map(join_path(cfg.out_dir, "desks.csv"), desks);
            orderflow::StreamBuildReport brep;
            stream = orderflow::build_market_order_stream(events, desks, flags, brep);
            for (const auto& f : brep.derived_flags)
                flags[{f.stock, f.day}] = f;
        } else {
            orderflow::IngestReport irep;
            stream = orderflow::read_stream(cfg.stream_path, flags, irep);
        }
        orderflow::write_stream(join_path(cfg.out_dir, "stream.csv"), stream);
        orderflow::write_day_flags(join_path(cfg.out_dir, "flags.csv"), flags);
        for (const auto& [k, v] : stream) stream_records += v.size();

        // --- extraction ---------------------------------------------------
        stage = "extraction";
        auto extraction = metaorder::extract_all(stream);
        metaorder::write_metaorders(join_path(cfg.out_dir, "metaorders.csv"),
                                    extraction.metaorders);
        metaorder::write_daily_stats(join_path(cfg.out_dir, "dailystats.csv"),
                                     extraction.stats);
        auto catalog = metaorder::build_catalog(extraction.metaorders,
                                                cfg.analysis.liquid_min_metaorders);

        // --- impact fits ----------------------------------------------------
        stage = "impact";
        impact::DropCounters drops;
        auto raw_samples = impact::compute_impact_samples(extraction.metaorders,
                                                          extraction.stats, stream, drops);
        auto samples = impact::filter_samples(raw_samples, cfg.analysis.min_horizon_sec,
                                              cfg.analysis.horizon_window);
        result.stock_fits = impact::fit_all_stocks(samples, catalog, cfg.analysis);
        impact::write_fit_table(join_path(cfg.out_dir, "fits_stock.csv"), result.stock_fits);
        result.trader_fits = impact::fit_all_traders(samples, catalog, cfg.analysis);
        impact::write_fit_table(join_path(cfg.out_dir, "fits_trader.csv"),
                                result.trader_fits);

        fs::create_directories(join_path(cfg.out_dir, "binned"));
        for (const auto& ef : result.stock_fits.fits)
            impact::write_binned(join_path(cfg.out_dir, "binned/" + sanitize(ef.entity) + ".csv"),
                                 ef.binned);

        auto scaling = impact::aggregate_scaling(result.stock_fits.fits,
                                                 cfg.analysis.valid_bin_min_count);
        impact::write_scaling_curve(join_path(cfg.out_dir, "scaling.csv"), scaling);

        // --- histograms -----------------------------------------------------
        stage = "histograms";
        std::vector<double> deltas, cs;
        for (const auto& ef : result.stock_fits.fits)
            if (ef.fit.available) {
                deltas.push_back(ef.fit.delta);
                cs.push_back(ef.fit.c);
            }
        write_histogram(join_path(cfg.out_dir, "delta_hist.csv"),
                        make_histogram(deltas, cfg.delta_hist_lo, cfg.delta_hist_hi,
                                       cfg.delta_hist_width));
        write_histogram(join_path(cfg.out_dir, "c_hist.csv"),
                        make_histogram(cs, cfg.c_hist_lo, cfg.c_hist_hi, cfg.c_hist_width));

        // --- tails and predictions ------------------------------------------
        stage = "tails";
        struct StockTails {
            powerlaw::TailFit q, l;
        };
        std::map<std::string, StockTails> tails;
        {
            std::map<std::string, std::vector<double>> qs, ls;
            for (const auto& m : extraction.metaorders) {
                if (!catalog.liquid(m.stock)) continue;
                auto st = extraction.stats.find({m.stock, m.day});
                if (st == extraction.stats.end() || !st->second.usable()) continue;
                qs[m.stock].push_back(std::abs(static_cast<double>(m.Q)) / st->second.V_D);
                ls[m.stock].push_back(static_cast<double>(m.L));
            }
            csv::Writer out(join_path(cfg.out_dir, "tails.csv"));
            out.raw_line("stock,quantity,exponent,x_min,n_tail,ks");
            for (auto& [stock, v] : qs) {
                StockTails t;
                t.q = powerlaw::clauset_fit(std::move(v), powerlaw::Variant::Continuous);
                t.l = powerlaw::clauset_fit(std::move(ls[stock]),
                                            powerlaw::Variant::Discrete);
                if (t.q.available) {
                    out.field(stock).field("Q").field(t.q.exponent).field(t.q.x_min);
                    out.field(t.q.n_tail).field(t.q.ks).end_row();
                }
                if (t.l.available) {
                    out.field(stock).field("L").field(t.l.exponent).field(t.l.x_min);
                    out.field(t.l.n_tail).field(t.l.ks).end_row();
                }
                tails[stock] = t;
            }
        }

        stage = "predictions";
        {
            std::vector<powerlaw::PredictionRow> rows;
            for (const auto& ef : result.stock_fits.fits) {
                if (!ef.fit.available) continue;
                auto it = tails.find(ef.entity);
                if (it == tails.end() || !it->second.q.available || !it->second.l.available)
                    continue;
                rows.push_back({ef.entity, ef.fit.delta, it->second.l.exponent,
                                it->second.q.exponent});
            }
            csv::Writer out(join_path(cfg.out_dir, "predictions.csv"));
            out.raw_line("key,value");
            out.field("n_stocks").field(rows.size()).end_row();
            if (rows.size() >= 3) {
                auto test = powerlaw::test_predictions(std::move(rows));
                powerlaw::write_prediction_scatter(join_path(cfg.out_dir, "scatter.csv"),
                                                   test);
                if (test.r_delta_alpha)
                    out.field("r_delta_alpha").field(*test.r_delta_alpha).end_row();
                if (test.r_delta_beta)
                    out.field("r_delta_beta").field(*test.r_delta_beta).end_row();
            }
        }

        // --- robustness ------------------------------------------------------
        if (cfg.run_splits) {
            stage = "crossvalidation";
            auto cv = crossvalidate(stream, cfg.splits, cfg.analysis);
            write_split_summaries(join_path(cfg.out_dir, "cv_splits.csv"), cv);
        }
        if (cfg.run_horizon) {
            stage = "horizon";
            auto base = impact::filter_samples(raw_samples, cfg.analysis.min_horizon_sec);
            auto hz = horizon_robustness(base, catalog, cfg.analysis,
                                         cfg.horizon_min_samples);
            write_horizon_results(join_path(cfg.out_dir, "horizon.csv"), hz);
        }

        // --- null model -------------------------------------------------------
        if (cfg.run_mc) {
            stage = "nullmodel";
            auto schedules = nullmodel::schedules_from_data(stream, extraction, catalog,
                                                            cfg.analysis);
            nullmodel::McConfig mcc;
            mcc.seed = cfg.seed;
            mcc.noise_scale = cfg.mc_noise_scale;
            mcc.n_trials = cfg.mc_trials;
            mcc.threads = cfg.threads;
            mcc.analysis = cfg.analysis;
            result.mc = nullmodel::run_monte_carlo(schedules, mcc);
            result.mc_ran = true;
            nullmodel::write_mc_summary(join_path(cfg.out_dir, "mc_summary.csv"),
                                        result.mc, mcc);
            nullmodel::write_mc_trials(join_path(cfg.out_dir, "mc_trials.csv"), result.mc);

            stage = "bias_correction";
            if (result.stock_fits.delta_summary.n > 0 && !result.mc.trial_mean_delta.empty()) {
                result.corrected = nullmodel::bias_correct(
                    result.stock_fits.delta_summary.mean, result.stock_fits.delta_summary.sem,
                    result.stock_fits.fingerprint, result.mc);
                csv::Writer out(join_path(cfg.out_dir, "bias_corrected.csv"));
                out.raw_line("key,value");
                out.field("mean_delta").field(result.stock_fits.delta_summary.mean).end_row();
                out.field("sem_delta").field(result.stock_fits.delta_summary.sem).end_row();
                out.field("mc_bias").field(result.mc.bias).end_row();
                out.field("unbiased_delta").field(result.corrected->mean).end_row();
                out.field("unbiased_se").field(result.corrected->se).end_row();
            }
        }

        // --- manifest ---------------------------------------------------------
        stage = "manifest";
        {
            std::ofstream m(join_path(cfg.out_dir, "manifest.txt"));
            uint64_t digest = cfg.config_digest.empty() ? digest_config(cfg)
                                                        : fnv1a64(cfg.config_digest);
            m << "code_version: " << kCodeVersion << "\n";
            m << "rng_algorithm: " << kRngAlgorithm << "\n";
            m << "config_hash: " << digest << "\n";
            m << "seed: " << cfg.seed << "\n";
            m << "threads: " << cfg.threads << "\n";
            m << "stream_records: " << stream_records << "\n";
            m << "stream_days: " << stream.size() << "\n";
            m << "metaorders: " << extraction.metaorders.size() << "\n";
            m << "skipped_days: " << extraction.skipped_days << "\n";
            m << "impact_samples: " << samples.size() << "\n";
            m << "stock_fits: " << result.stock_fits.fits.size() << "\n";
            m << "trader_fits: " << result.trader_fits.fits.size() << "\n";
            m << "mc_trials: " << (result.mc_ran ? result.mc.n_trials : 0) << "\n";
        }
    } catch (const std::exception& e) {
        fail(e);
        throw;
    }
    return result;
}

void write_synth_fixture(const nullmodel::SynthConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    orderflow::Stream stream;
    orderflow::FlagTable flags;
    for (int si = 0; si < cfg.n_stocks; ++si) {
        auto sched = nullmodel::synth_schedule(cfg, static_cast<size_t>(si));
        std::vector<int8_t> signs;
        for (const auto& m : sched.metas) signs.push_back(m.sign);

        SplitMix64 rng(derive_stream(cfg.seed, "fixture:" + sched.stock, 0));
        constexpr double kVolumeScale = 1e9;  // integer shares per unit of q
        for (size_t di = 0; di < sched.days.size(); ++di) {
            const auto& day = sched.days[di];
            auto prices = nullmodel::simulate_prices(day, signs, sched.c, 1.0, 100.0, rng);

            // per-metaorder cumulative q, to integerize child volumes
            std::vector<double> cum_q(sched.metas.size(), 0.0);
            auto& recs = stream[{sched.stock, day.day}];
            recs.reserve(day.ticks.size());
            double phys = 0.0;
            for (size_t k = 0; k < day.ticks.size(); ++k) {
                const auto& t = day.ticks[k];
                phys += t.noise_sd * t.noise_sd * 18000.0;
                double q_prev = cum_q[t.meta];
                double sq = std::sqrt(q_prev) + t.sqrt_dq;
                double q_cur = sq * sq;
                cum_q[t.meta] = q_cur;
                orderflow::MarketOrderRecord r;
                r.day = day.day;
                r.stock = sched.stock;
                r.tick = static_cast<int>(k) + 1;
                r.phys_time = phys;
                r.trader = sched.traders[sched.metas[t.meta].trader];
                r.sign = signs[t.meta];
                r.volume = std::max<long long>(
                    1, std::llround((q_cur - q_prev) * kVolumeScale));
                r.midprice = prices[k];
                recs.push_back(std::move(r));
            }
            flags[{sched.stock, day.day}] =
                orderflow::DayFlags{day.day, sched.stock, false, "none"};
        }
    }
    orderflow::write_stream((fs::path(dir) / "stream.csv").string(), stream);
    orderflow::write_day_flags((fs::path(dir) / "flags.csv").string(), flags);
}

} // namespace srl::report
