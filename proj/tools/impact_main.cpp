#include "srl/config.hpp"
#include "srl/csv.hpp"
#include "srl/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace srl;

namespace {

// exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

impact::AnalysisConfig analysis_from_ini(const config::Ini& ini) {
    impact::AnalysisConfig a;
    a.min_horizon_sec = ini.get_double("analysis.min_horizon_sec", a.min_horizon_sec);
    a.valid_bin_min_count = ini.get_int("analysis.valid_bin_min_count", a.valid_bin_min_count);
    a.liquid_min_metaorders =
        ini.get_int("analysis.liquid_min_metaorders", a.liquid_min_metaorders);
    a.active_min_metaorders =
        ini.get_int("analysis.active_min_metaorders", a.active_min_metaorders);
    a.active_min_bins =
        static_cast<int>(ini.get_int("analysis.active_min_bins", a.active_min_bins));
    a.solver_tol = ini.get_double("analysis.solver_tol", a.solver_tol);
    return a;
}

report::SplitConfig splits_from_ini(const config::Ini& ini) {
    report::SplitConfig s;
    s.splits[0].first = ini.get_string("splits.first1", s.splits[0].first);
    s.splits[0].last = ini.get_string("splits.last1", s.splits[0].last);
    s.splits[1].first = ini.get_string("splits.first2", s.splits[1].first);
    s.splits[1].last = ini.get_string("splits.last2", s.splits[1].last);
    return s;
}

std::optional<impact::HorizonWindow> parse_window(const std::string& spec) {
    if (spec.empty()) return std::nullopt;
    double lo = 0.0, hi = 0.0;
    if (std::sscanf(spec.c_str(), "%lf,%lf", &lo, &hi) != 2 || hi <= lo)
        throw CLI::ValidationError("--horizon-window", "expected LO,HI seconds with HI > LO");
    return impact::HorizonWindow{lo, hi};
}

orderflow::Stream load_stream(const std::string& path, const std::string& flags_path) {
    orderflow::FlagTable flags;
    if (!flags_path.empty()) flags = orderflow::read_day_flags(flags_path);
    orderflow::IngestReport rep;
    return orderflow::read_stream(path, flags, rep);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"metaorder impact analysis"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", config_path, "INI config file");
    app.add_option("--seed", seed, "global RNG seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    // ingest -----------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "event log -> market-order stream");
    std::string in_events, in_format = "csv", in_flags, out_dir;
    ingest->add_option("--events", in_events, "raw event log")->required();
    ingest->add_option("--format", in_format)->check(CLI::IsMember({"csv", "ndjson"}));
    ingest->add_option("--flags", in_flags, "day exclusion flags csv");
    ingest->add_option("--out", out_dir, "output directory")->required();

    // desks --------------------------------------------------------------------
    auto* desks = app.add_subcommand("desks", "virtual-server -> desk assignment");
    std::string desks_events, desks_format = "csv", desks_out;
    desks->add_option("--events", desks_events)->required();
    desks->add_option("--format", desks_format)->check(CLI::IsMember({"csv", "ndjson"}));
    desks->add_option("--out", desks_out)->required();

    // metaorders ------------------------------------------------------------------
    auto* meta = app.add_subcommand("metaorders", "stream -> metaorders + daily stats");
    std::string meta_stream, meta_flags, meta_out;
    meta->add_option("--in", meta_stream, "market-order stream csv")->required();
    meta->add_option("--flags", meta_flags);
    meta->add_option("--out", meta_out, "output directory")->required();

    // fit ----------------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "binned power-law impact fits");
    std::string fit_stream, fit_flags, fit_out, fit_binned_dir, fit_level = "stock";
    std::string fit_window;
    double fit_min_horizon = 60.0;
    fit->add_option("--in", fit_stream, "market-order stream csv")->required();
    fit->add_option("--flags", fit_flags);
    fit->add_option("--level", fit_level)->check(CLI::IsMember({"stock", "trader"}));
    fit->add_option("--min-horizon-sec", fit_min_horizon);
    fit->add_option("--horizon-window", fit_window, "LO,HI seconds, half-open");
    fit->add_option("--out", fit_out, "fit table csv")->required();
    fit->add_option("--out-binned", fit_binned_dir, "per-entity binned csv directory");

    // tails -----------------------------------------------------------------------
    auto* tails = app.add_subcommand("tails", "metaorder volume / run-length tail fits");
    std::string tails_stream, tails_flags, tails_out;
    tails->add_option("--in", tails_stream, "market-order stream csv")->required();
    tails->add_option("--flags", tails_flags);
    tails->add_option("--out", tails_out)->required();

    // test-predictions ------------------------------------------------------------
    auto* pred = app.add_subcommand("test-predictions",
                                    "correlate delta against tail exponents");
    std::string pred_in;
    pred->add_option("--in", pred_in, "scatter csv: stock,delta,alpha_minus_1,beta_minus_1")
        ->required();

    // simulate ---------------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "write a synthetic stream fixture");
    nullmodel::SynthConfig synth;
    std::string sim_out, sim_qmode = "powerlaw";
    sim->add_option("--stocks", synth.n_stocks)->check(CLI::PositiveNumber);
    sim->add_option("--metaorders-per-stock", synth.metaorders_per_stock)
        ->check(CLI::PositiveNumber);
    sim->add_option("--metaorders-per-day", synth.metaorders_per_day)
        ->check(CLI::PositiveNumber);
    sim->add_option("--traders", synth.traders_per_stock)->check(CLI::PositiveNumber);
    sim->add_option("--alpha", synth.alpha);
    sim->add_option("--beta", synth.beta);
    sim->add_option("--l-min", synth.l_min);
    sim->add_option("--l-max", synth.l_max);
    sim->add_option("--q-mode", sim_qmode)->check(CLI::IsMember({"powerlaw", "bincenters"}));
    sim->add_option("--c", synth.c);
    sim->add_option("--out", sim_out)->required();

    // mc -----------------------------------------------------------------------------
    auto* mc = app.add_subcommand("mc", "null-model Monte Carlo on real schedules");
    std::string mc_stream, mc_flags, mc_out;
    int mc_trials = 100;
    double mc_noise = 1.0;
    mc->add_option("--in", mc_stream, "market-order stream csv")->required();
    mc->add_option("--flags", mc_flags);
    mc->add_option("--trials", mc_trials)->check(CLI::PositiveNumber);
    mc->add_option("--noise-scale", mc_noise);
    mc->add_option("--out", mc_out, "output directory")->required();

    // report / pipeline ----------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "analysis artifacts without the null model");
    auto* pipe = app.add_subcommand("pipeline", "full end-to-end run");
    std::string p_events, p_format = "csv", p_stream, p_flags, p_out;
    int p_mc_trials = 100;
    double p_noise = 1.0;
    bool p_no_splits = false, p_no_horizon = false, p_no_mc = false;
    for (auto* cmd : {rep, pipe}) {
        cmd->add_option("--events", p_events, "raw event log");
        cmd->add_option("--format", p_format)->check(CLI::IsMember({"csv", "ndjson"}));
        cmd->add_option("--stream", p_stream, "pre-built market-order stream csv");
        cmd->add_option("--flags", p_flags);
        cmd->add_option("--out", p_out, "output directory")->required();
        cmd->add_flag("--no-splits", p_no_splits);
        cmd->add_flag("--no-horizon", p_no_horizon);
    }
    pipe->add_option("--mc-trials", p_mc_trials)->check(CLI::PositiveNumber);
    pipe->add_option("--noise-scale", p_noise);
    pipe->add_flag("--no-mc", p_no_mc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        config::Ini ini;
        if (!config_path.empty()) ini = config::Ini::parse_file(config_path);
        impact::AnalysisConfig analysis = analysis_from_ini(ini);

        if (*ingest) {
            fs::create_directories(out_dir);
            orderflow::IngestReport irep;
            auto format = in_format == "ndjson" ? orderflow::EventFormat::Ndjson
                                                : orderflow::EventFormat::Csv;
            auto events = orderflow::ingest_events(in_events, format, irep);
            auto desk_map = orderflow::DeskMap::build(events);
            orderflow::write_desk_map((fs::path(out_dir) / "desks.csv").string(), desk_map);
            orderflow::FlagTable flags;
            if (!in_flags.empty()) flags = orderflow::read_day_flags(in_flags);
            orderflow::StreamBuildReport brep;
            auto stream = orderflow::build_market_order_stream(events, desk_map, flags, brep);
            for (const auto& f : brep.derived_flags) flags[{f.stock, f.day}] = f;
            orderflow::write_stream((fs::path(out_dir) / "stream.csv").string(), stream);
            orderflow::write_day_flags((fs::path(out_dir) / "flags.csv").string(), flags);
            std::cout << "rows=" << irep.rows << " events=" << irep.events
                      << " malformed=" << irep.malformed
                      << " out_of_session=" << irep.out_of_session
                      << " records=" << brep.records
                      << " excluded_days=" << brep.excluded_days << "\n";
        } else if (*desks) {
            orderflow::IngestReport irep;
            auto format = desks_format == "ndjson" ? orderflow::EventFormat::Ndjson
                                                   : orderflow::EventFormat::Csv;
            auto events = orderflow::ingest_events(desks_events, format, irep);
            orderflow::write_desk_map(desks_out, orderflow::DeskMap::build(events));
        } else if (*meta) {
            fs::create_directories(meta_out);
            auto stream = load_stream(meta_stream, meta_flags);
            auto ex = metaorder::extract_all(stream);
            metaorder::write_metaorders((fs::path(meta_out) / "metaorders.csv").string(),
                                        ex.metaorders);
            metaorder::write_daily_stats((fs::path(meta_out) / "dailystats.csv").string(),
                                         ex.stats);
            std::cout << "metaorders=" << ex.metaorders.size()
                      << " skipped_days=" << ex.skipped_days << "\n";
        } else if (*fit) {
            analysis.min_horizon_sec = fit_min_horizon;
            analysis.horizon_window = parse_window(fit_window);
            auto stream = load_stream(fit_stream, fit_flags);
            auto ex = metaorder::extract_all(stream);
            auto catalog = metaorder::build_catalog(ex.metaorders,
                                                    analysis.liquid_min_metaorders);
            impact::DropCounters drops;
            auto samples = impact::compute_impact_samples(ex.metaorders, ex.stats, stream,
                                                          drops);
            samples = impact::filter_samples(samples, analysis.min_horizon_sec,
                                             analysis.horizon_window);
            auto table = fit_level == "trader"
                             ? impact::fit_all_traders(samples, catalog, analysis)
                             : impact::fit_all_stocks(samples, catalog, analysis);
            impact::write_fit_table(fit_out, table);
            if (!fit_binned_dir.empty()) {
                fs::create_directories(fit_binned_dir);
                for (const auto& ef : table.fits) {
                    std::string name = ef.entity;
                    for (char& ch : name)
                        if (ch == '/' || ch == ':' || ch == '\\') ch = '_';
                    impact::write_binned(
                        (fs::path(fit_binned_dir) / (name + ".csv")).string(), ef.binned);
                }
            }
            size_t bad = 0;
            for (const auto& ef : table.fits)
                if (ef.fit.available && !ef.fit.converged) ++bad;
            std::cout << "entities=" << table.fits.size() << " skipped="
                      << table.skipped.size() << " mean_delta="
                      << table.delta_summary.mean << "\n";
            if (bad > 0) throw NumericError("fit: " + std::to_string(bad) +
                                            " entities did not converge");
        } else if (*tails) {
            auto stream = load_stream(tails_stream, tails_flags);
            auto ex = metaorder::extract_all(stream);
            auto catalog = metaorder::build_catalog(ex.metaorders,
                                                    analysis.liquid_min_metaorders);
            std::map<std::string, std::vector<double>> qs, ls;
            for (const auto& m : ex.metaorders) {
                if (!catalog.liquid(m.stock)) continue;
                auto st = ex.stats.find({m.stock, m.day});
                if (st == ex.stats.end() || !st->second.usable()) continue;
                qs[m.stock].push_back(std::abs(static_cast<double>(m.Q)) / st->second.V_D);
                ls[m.stock].push_back(static_cast<double>(m.L));
            }
            csv::Writer out(tails_out);
            out.raw_line("stock,quantity,exponent,x_min,n_tail,ks");
            for (auto& [stock, v] : qs) {
                auto q = powerlaw::clauset_fit(std::move(v), powerlaw::Variant::Continuous);
                auto l = powerlaw::clauset_fit(std::move(ls[stock]),
                                               powerlaw::Variant::Discrete);
                if (q.available) {
                    out.field(stock).field("Q").field(q.exponent).field(q.x_min);
                    out.field(q.n_tail).field(q.ks).end_row();
                }
                if (l.available) {
                    out.field(stock).field("L").field(l.exponent).field(l.x_min);
                    out.field(l.n_tail).field(l.ks).end_row();
                }
            }
        } else if (*pred) {
            csv::Reader in(pred_in);
            std::string_view line;
            if (!in.next_line(line) || line != "stock,delta,alpha_minus_1,beta_minus_1")
                throw std::runtime_error("test-predictions: unexpected header in " + pred_in);
            std::vector<powerlaw::PredictionRow> rows;
            std::vector<std::string_view> f;
            while (in.next_line(line)) {
                if (line.empty()) continue;
                csv::split(line, f);
                powerlaw::PredictionRow r;
                double am1 = 0.0, bm1 = 0.0;
                if (f.size() != 4 || !csv::parse_double(f[1], r.delta) ||
                    !csv::parse_double(f[2], am1) || !csv::parse_double(f[3], bm1))
                    throw std::runtime_error("test-predictions: malformed row");
                r.stock = std::string(f[0]);
                r.alpha = am1 + 1.0;
                r.beta = bm1 + 1.0;
                rows.push_back(std::move(r));
            }
            auto test = powerlaw::test_predictions(std::move(rows));
            std::cout << "n=" << test.rows.size();
            if (test.r_delta_alpha) std::cout << " r_delta_alpha=" << *test.r_delta_alpha;
            if (test.r_delta_beta) std::cout << " r_delta_beta=" << *test.r_delta_beta;
            std::cout << "\n";
        } else if (*sim) {
            synth.seed = seed;
            synth.q_mode = sim_qmode == "bincenters"
                               ? nullmodel::SynthConfig::QMode::BinCenters
                               : nullmodel::SynthConfig::QMode::PowerLaw;
            report::write_synth_fixture(synth, sim_out);
        } else if (*mc) {
            fs::create_directories(mc_out);
            auto stream = load_stream(mc_stream, mc_flags);
            auto ex = metaorder::extract_all(stream);
            auto catalog = metaorder::build_catalog(ex.metaorders,
                                                    analysis.liquid_min_metaorders);
            auto schedules = nullmodel::schedules_from_data(stream, ex, catalog, analysis);
            if (schedules.empty())
                throw std::runtime_error("mc: no liquid stocks in input");
            nullmodel::McConfig mcc;
            mcc.seed = seed;
            mcc.noise_scale = mc_noise;
            mcc.n_trials = mc_trials;
            mcc.threads = threads;
            mcc.analysis = analysis;
            auto summary = nullmodel::run_monte_carlo(schedules, mcc);
            nullmodel::write_mc_summary((fs::path(mc_out) / "mc_summary.csv").string(),
                                        summary, mcc);
            nullmodel::write_mc_trials((fs::path(mc_out) / "mc_trials.csv").string(),
                                       summary);
            std::cout << "mean_delta=" << summary.mean_delta << " +/- "
                      << summary.se_mean_delta << " sigma_delta="
                      << summary.mean_sigma_delta << " bias=" << summary.bias << "\n";
            if (summary.trial_mean_delta.empty())
                throw NumericError("mc: every trial was dropped");
        } else if (*rep || *pipe) {
            if (p_events.empty() == p_stream.empty())
                throw CLI::ValidationError("pipeline",
                                           "exactly one of --events/--stream is required");
            report::PipelineConfig pc;
            pc.events_path = p_events;
            pc.event_format = p_format == "ndjson" ? orderflow::EventFormat::Ndjson
                                                   : orderflow::EventFormat::Csv;
            pc.stream_path = p_stream;
            pc.flags_path = p_flags;
            pc.out_dir = p_out;
            pc.analysis = analysis;
            pc.splits = splits_from_ini(ini);
            pc.run_splits = !p_no_splits;
            pc.run_horizon = !p_no_horizon;
            pc.horizon_min_samples =
                ini.get_int("horizon.min_samples", pc.horizon_min_samples);
            pc.run_mc = *pipe && !p_no_mc;
            pc.mc_trials = static_cast<int>(ini.get_int("mc.trials", p_mc_trials));
            pc.mc_noise_scale = ini.get_double("mc.noise_scale", p_noise);
            pc.seed = seed;
            pc.threads = threads;
            for (const auto& [k, v] : ini.values())
                pc.config_digest += k + "=" + v + ";";
            auto result = report::run_pipeline(pc);
            std::cout << "stock_fits=" << result.stock_fits.fits.size()
                      << " trader_fits=" << result.trader_fits.fits.size();
            if (result.corrected)
                std::cout << " unbiased_delta=" << result.corrected->mean << " +/- "
                          << result.corrected->se;
            std::cout << "\n";
        }
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
