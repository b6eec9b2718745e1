#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace srl::orderflow {

enum class Action { Submit, Modify, Cancel, Execute };
enum class Side { Buy, Sell };

// One row of the raw exchange log. phys_time is seconds since 09:00:00;
// the continuous sessions map to [0,9000] and [12600,18000].
struct OrderEvent {
    std::string day;
    std::string stock;
    std::string virtual_server;
    std::string order_id;
    Action action = Action::Submit;
    Side side = Side::Buy;
    long long price = 0;
    long long volume = 0;
    double phys_time = 0.0;
    // Best quotes just before an execution. Only meaningful on execute rows;
    // carried via optional trailing bid,ask columns in the event CSV.
    std::optional<double> best_bid;
    std::optional<double> best_ask;
};

struct IngestReport {
    size_t rows = 0;            // data rows seen
    size_t events = 0;          // events emitted
    size_t malformed = 0;       // skipped with warning
    size_t out_of_session = 0;  // dropped: timestamp inside auction/lunch gap
};

enum class EventFormat { Csv, Ndjson };

// Reads the event log. Schema mismatch throws; malformed rows and
// out-of-session timestamps are counted, not fatal.
std::vector<OrderEvent> ingest_events(const std::string& path, EventFormat format,
                                      IngestReport& report);

bool in_continuous_session(double phys_time);

// Trading-desk assignment: virtual servers sharing any order_id lifecycle
// collapse into one desk. Canonical desk ID is the lexicographically
// smallest member server, so the map is independent of input order.
class DeskMap {
public:
    // Servers never seen during construction are their own desk.
    const std::string& desk(const std::string& virtual_server) const;

    // Non-singleton assignments only; singletons are implicit.
    const std::map<std::string, std::string>& assignment() const { return assignment_; }

    static DeskMap build(const std::vector<OrderEvent>& events);

private:
    std::map<std::string, std::string> assignment_;
};

// Canonical per-transaction stream: one record per market order.
struct MarketOrderRecord {
    std::string day;
    std::string stock;
    int tick = 0;            // 1..N within (day, stock)
    double phys_time = 0.0;
    std::string trader;      // desk ID
    int sign = +1;           // +1 buy, -1 sell
    long long volume = 0;
    double midprice = 0.0;   // midprice just before this market order
};

struct DayFlags {
    std::string day;
    std::string stock;
    bool excluded = false;
    std::string reason = "none";  // price_limit, circuit_breaker, liquidity_sweep,
                                  // zero_volatility, zero_volume, none
};

struct DayKey {
    std::string stock;
    std::string day;
    auto operator<=>(const DayKey&) const = default;
};

using FlagTable = std::map<DayKey, DayFlags>;

FlagTable read_day_flags(const std::string& path);
void write_day_flags(const std::string& path, const FlagTable& flags);

struct StreamBuildReport {
    size_t records = 0;
    size_t excluded_days = 0;
    size_t dropped_days_missing_midprice = 0;
    size_t dropped_days_nonmonotone_time = 0;
    std::vector<DayFlags> derived_flags;  // days dropped during the build
};

// Per-(stock, day) record vectors, ordered and tick-numbered 1..N.
using Stream = std::map<DayKey, std::vector<MarketOrderRecord>>;

Stream build_market_order_stream(const std::vector<OrderEvent>& events,
                                 const DeskMap& desks, const FlagTable& flags,
                                 StreamBuildReport& report);

// Reduced input format: day,stock,tick,phys_time,trader,sign,volume,midprice
Stream read_stream(const std::string& path, const FlagTable& flags, IngestReport& report);
void write_stream(const std::string& path, const Stream& stream);

void write_desk_map(const std::string& path, const DeskMap& desks);

} // namespace srl::orderflow
