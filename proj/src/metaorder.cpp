#include "srl/metaorder.hpp"
#include "srl/csv.hpp"

#include <algorithm>
#include <cmath>

namespace srl::metaorder {

std::optional<DailyStats> compute_daily_stats(const std::vector<MarketOrderRecord>& records) {
    if (records.empty()) return std::nullopt;
    DailyStats st;
    st.day = records.front().day;
    st.stock = records.front().stock;
    double lo = records.front().midprice, hi = lo;
    long long vol = 0;
    for (const auto& r : records) {
        lo = std::min(lo, r.midprice);
        hi = std::max(hi, r.midprice);
        vol += r.volume;
    }
    st.sigma_D = hi - lo;
    st.V_D = static_cast<double>(vol);
    st.N = static_cast<long long>(records.size());
    return st;
}

std::vector<Metaorder> extract_metaorders(const std::vector<MarketOrderRecord>& records) {
    // Reduced per-trader sequences, then runs of equal sign.
    std::map<std::string, std::vector<const MarketOrderRecord*>> per_trader;
    for (const auto& r : records) per_trader[r.trader].push_back(&r);

    std::vector<Metaorder> out;
    for (const auto& [trader, recs] : per_trader) {
        size_t i = 0;
        int run_index = 0;
        while (i < recs.size()) {
            size_t j = i;
            while (j + 1 < recs.size() && recs[j + 1]->sign == recs[i]->sign) ++j;
            Metaorder m;
            m.day = recs[i]->day;
            m.stock = recs[i]->stock;
            m.trader = trader;
            m.r = ++run_index;
            m.sign = recs[i]->sign;
            m.L = static_cast<int>(j - i + 1);
            m.t_start = recs[i]->tick;
            m.t_end = recs[j]->tick;
            m.T = recs[j]->phys_time - recs[i]->phys_time;
            long long cum = 0;
            m.child_cumvol.reserve(m.L);
            for (size_t k = i; k <= j; ++k) {
                cum += recs[k]->volume;
                m.child_cumvol.push_back(cum);
            }
            m.Q = m.sign * cum;
            out.push_back(std::move(m));
            i = j + 1;
        }
    }
    return out;
}

StockCatalog build_catalog(const std::vector<Metaorder>& metaorders, long long liquid_threshold) {
    StockCatalog cat;
    cat.liquid_threshold = liquid_threshold;
    for (const auto& m : metaorders) {
        ++cat.metaorders_per_stock[m.stock];
        ++cat.per_trader[{m.stock, m.trader}];
    }
    return cat;
}

ExtractionResult extract_all(const Stream& stream) {
    ExtractionResult res;
    for (const auto& [key, recs] : stream) {
        auto st = compute_daily_stats(recs);
        if (!st || !st->usable()) {
            ++res.skipped_days;
            continue;
        }
        res.stats.emplace(key, *st);
        auto metas = extract_metaorders(recs);
        res.metaorders.insert(res.metaorders.end(),
                              std::make_move_iterator(metas.begin()),
                              std::make_move_iterator(metas.end()));
    }
    return res;
}

void write_metaorders(const std::string& path, const std::vector<Metaorder>& metaorders) {
    csv::Writer out(path);
    out.raw_line("day,stock,trader,r,sign,Q,L,t_start,t_end,T_seconds");
    for (const auto& m : metaorders) {
        out.field(m.day).field(m.stock).field(m.trader).field(m.r).field(m.sign)
           .field(m.Q).field(m.L).field(m.t_start).field(m.t_end).field(m.T);
        out.end_row();
    }
}

std::vector<Metaorder> read_metaorders(const std::string& path) {
    csv::Reader in(path);
    std::string_view line;
    if (!in.next_line(line) || line != "day,stock,trader,r,sign,Q,L,t_start,t_end,T_seconds")
        throw std::runtime_error(path + ": unexpected metaorder header");
    std::vector<Metaorder> out;
    std::vector<std::string_view> f;
    while (in.next_line(line)) {
        if (line.empty()) continue;
        csv::split(line, f);
        if (f.size() != 10) throw std::runtime_error(path + ": malformed metaorder row");
        Metaorder m;
        m.day = std::string(f[0]);
        m.stock = std::string(f[1]);
        m.trader = std::string(f[2]);
        bool ok = csv::parse_int(f[3], m.r) && csv::parse_int(f[4], m.sign) &&
                  csv::parse_ll(f[5], m.Q) && csv::parse_int(f[6], m.L) &&
                  csv::parse_int(f[7], m.t_start) && csv::parse_int(f[8], m.t_end) &&
                  csv::parse_double(f[9], m.T);
        if (!ok) throw std::runtime_error(path + ": malformed metaorder row");
        out.push_back(std::move(m));
    }
    return out;
}

void write_daily_stats(const std::string& path, const StatsTable& stats) {
    csv::Writer out(path);
    out.raw_line("day,stock,sigma_D,V_D,N");
    for (const auto& [key, st] : stats) {
        out.field(st.day).field(st.stock).field(st.sigma_D).field(st.V_D).field(st.N);
        out.end_row();
    }
}

} // namespace srl::metaorder
