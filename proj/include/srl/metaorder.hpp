#pragma once

#include "srl/orderflow.hpp"

#include <optional>
#include <set>

namespace srl::metaorder {

using orderflow::DayKey;
using orderflow::MarketOrderRecord;
using orderflow::Stream;

struct DailyStats {
    std::string day;
    std::string stock;
    double sigma_D = 0.0;  // max - min daily midprice
    double V_D = 0.0;      // total transacted volume
    long long N = 0;       // transaction count
    bool usable() const { return sigma_D > 0.0 && V_D > 0.0; }
};

using StatsTable = std::map<DayKey, DailyStats>;

// One same-sign run by one trader on one day. Q is signed; analyses use |Q|.
struct Metaorder {
    std::string day;
    std::string stock;
    std::string trader;
    int r = 0;               // run index within (trader, day)
    int sign = +1;
    long long Q = 0;         // signed total volume
    int L = 0;               // run length
    int t_start = 0, t_end = 0;
    double T = 0.0;          // liquidation horizon, seconds
    std::vector<long long> child_cumvol;  // strictly increasing, |Q| last
};

struct StockCatalog {
    std::map<std::string, long long> metaorders_per_stock;                 // M_s
    std::map<std::pair<std::string, std::string>, long long> per_trader;   // M_s^(i)
    long long liquid_threshold = 100000;  // liquid iff M_s > threshold

    bool liquid(const std::string& stock) const {
        auto it = metaorders_per_stock.find(stock);
        return it != metaorders_per_stock.end() && it->second > liquid_threshold;
    }
};

// Empty (or zero-volatility / zero-volume) days yield no stats.
std::optional<DailyStats> compute_daily_stats(const std::vector<MarketOrderRecord>& records);

// Per-trader segmentation of one (day, stock)'s tick-ordered records into
// same-sign runs. Output ordered by (trader, r).
std::vector<Metaorder> extract_metaorders(const std::vector<MarketOrderRecord>& records);

StockCatalog build_catalog(const std::vector<Metaorder>& metaorders,
                           long long liquid_threshold = 100000);

// Convenience: stats plus metaorders for every usable day in a stream.
// Days failing the stats preconditions contribute nothing downstream.
struct ExtractionResult {
    StatsTable stats;
    std::vector<Metaorder> metaorders;  // ordered by (stock, day, trader, r)
    size_t skipped_days = 0;
};

ExtractionResult extract_all(const Stream& stream);

void write_metaorders(const std::string& path, const std::vector<Metaorder>& metaorders);
void write_daily_stats(const std::string& path, const StatsTable& stats);
std::vector<Metaorder> read_metaorders(const std::string& path);

} // namespace srl::metaorder
