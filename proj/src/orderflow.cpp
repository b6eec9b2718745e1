#include "srl/orderflow.hpp"
#include "srl/csv.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

namespace srl::orderflow {

namespace {

const std::string kEventHeader = "day,stock,virtual_server,order_id,action,side,price,volume,phys_time";
const std::string kEventHeaderQuotes = kEventHeader + ",bid,ask";
const std::string kStreamHeader = "day,stock,tick,phys_time,trader,sign,volume,midprice";
const std::string kFlagsHeader = "day,stock,excluded,reason";

bool parse_action(std::string_view s, Action& out) {
    if (s == "submit") out = Action::Submit;
    else if (s == "modify") out = Action::Modify;
    else if (s == "cancel") out = Action::Cancel;
    else if (s == "execute") out = Action::Execute;
    else return false;
    return true;
}

bool parse_side(std::string_view s, Side& out) {
    if (s == "buy") out = Side::Buy;
    else if (s == "sell") out = Side::Sell;
    else return false;
    return true;
}

bool parse_event_fields(const std::vector<std::string_view>& f, bool with_quotes, OrderEvent& ev) {
    if (f.size() != (with_quotes ? 11u : 9u)) return false;
    ev.day = std::string(f[0]);
    ev.stock = std::string(f[1]);
    ev.virtual_server = std::string(f[2]);
    ev.order_id = std::string(f[3]);
    if (!parse_action(f[4], ev.action)) return false;
    if (!parse_side(f[5], ev.side)) return false;
    if (!csv::parse_ll(f[6], ev.price)) return false;
    if (!csv::parse_ll(f[7], ev.volume)) return false;
    if (!csv::parse_double(f[8], ev.phys_time)) return false;
    if (ev.volume < 0) return false;
    if (ev.volume == 0 && (ev.action == Action::Submit || ev.action == Action::Execute)) return false;
    ev.best_bid.reset();
    ev.best_ask.reset();
    if (with_quotes) {
        double bid, ask;
        if (!f[9].empty()) {
            if (!csv::parse_double(f[9], bid)) return false;
            ev.best_bid = bid;
        }
        if (!f[10].empty()) {
            if (!csv::parse_double(f[10], ask)) return false;
            ev.best_ask = ask;
        }
    }
    return true;
}

bool parse_event_json(std::string_view line, OrderEvent& ev) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;
    try {
        ev.day = j.at("day").get<std::string>();
        ev.stock = j.at("stock").get<std::string>();
        ev.virtual_server = j.at("virtual_server").get<std::string>();
        ev.order_id = j.at("order_id").get<std::string>();
        if (!parse_action(j.at("action").get<std::string>(), ev.action)) return false;
        if (!parse_side(j.at("side").get<std::string>(), ev.side)) return false;
        ev.price = j.at("price").get<long long>();
        ev.volume = j.at("volume").get<long long>();
        ev.phys_time = j.at("phys_time").get<double>();
        ev.best_bid.reset();
        ev.best_ask.reset();
        if (j.contains("bid")) ev.best_bid = j["bid"].get<double>();
        if (j.contains("ask")) ev.best_ask = j["ask"].get<double>();
    } catch (const nlohmann::json::exception&) {
        return false;
    }
    if (ev.volume < 0) return false;
    if (ev.volume == 0 && (ev.action == Action::Submit || ev.action == Action::Execute)) return false;
    return true;
}

} // namespace

bool in_continuous_session(double t) {
    return (t >= 0.0 && t <= 9000.0) || (t >= 12600.0 && t <= 18000.0);
}

std::vector<OrderEvent> ingest_events(const std::string& path, EventFormat format,
                                      IngestReport& report) {
    csv::Reader in(path);
    std::vector<OrderEvent> events;
    std::string_view line;
    bool with_quotes = false;
    if (format == EventFormat::Csv) {
        if (!in.next_line(line)) throw std::runtime_error(path + ": empty file");
        if (line == kEventHeaderQuotes) with_quotes = true;
        else if (line != kEventHeader) throw std::runtime_error(path + ": unexpected event header");
    }
    std::vector<std::string_view> fields;
    while (in.next_line(line)) {
        if (line.empty()) continue;
        ++report.rows;
        OrderEvent ev;
        bool ok;
        if (format == EventFormat::Csv) {
            csv::split(line, fields);
            ok = parse_event_fields(fields, with_quotes, ev);
        } else {
            ok = parse_event_json(line, ev);
        }
        if (!ok) {
            ++report.malformed;
            continue;
        }
        if (!in_continuous_session(ev.phys_time)) {
            ++report.out_of_session;
            continue;
        }
        events.push_back(std::move(ev));
        ++report.events;
    }
    return events;
}

// -- DeskMap ----------------------------------------------------------------

namespace {

class UnionFind {
public:
    int add() {
        parent_.push_back(static_cast<int>(parent_.size()));
        rank_.push_back(0);
        return static_cast<int>(parent_.size()) - 1;
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];  // path halving
            x = parent_[x];
        }
        return x;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
};

} // namespace

DeskMap DeskMap::build(const std::vector<OrderEvent>& events) {
    // Node universe: virtual servers. Orders act as hyperedges joining every
    // server seen in their lifecycle.
    UnionFind uf;
    std::map<std::string, int> server_index;  // ordered: canonicalization below
    std::unordered_map<std::string, int> order_anchor;

    auto server_id = [&](const std::string& vs) {
        auto [it, inserted] = server_index.emplace(vs, -1);
        if (inserted) it->second = uf.add();
        return it->second;
    };

    for (const auto& ev : events) {
        int sid = server_id(ev.virtual_server);
        auto [it, inserted] = order_anchor.emplace(ev.order_id, sid);
        if (!inserted) uf.unite(it->second, sid);
    }

    // Canonical desk ID per component: smallest member server. server_index
    // iterates in lexicographic order, so the first hit per root is it.
    std::unordered_map<int, const std::string*> root_name;
    for (const auto& [name, idx] : server_index) {
        int root = uf.find(idx);
        root_name.emplace(root, &name);
    }

    // Record entries for multi-server desks only; singletons resolve to
    // themselves via desk().
    std::unordered_map<int, int> comp_size;
    for (const auto& [name, idx] : server_index) ++comp_size[uf.find(idx)];
    DeskMap dm;
    for (const auto& [name, idx] : server_index) {
        int root = uf.find(idx);
        if (comp_size[root] > 1) dm.assignment_.emplace(name, *root_name.at(root));
    }
    return dm;
}

const std::string& DeskMap::desk(const std::string& virtual_server) const {
    auto it = assignment_.find(virtual_server);
    return it == assignment_.end() ? virtual_server : it->second;
}

void write_desk_map(const std::string& path, const DeskMap& desks) {
    csv::Writer out(path);
    out.raw_line("virtual_server,desk");
    for (const auto& [vs, desk] : desks.assignment()) {
        out.field(vs).field(desk);
        out.end_row();
    }
}

// -- Day flags ---------------------------------------------------------------

FlagTable read_day_flags(const std::string& path) {
    csv::Reader in(path);
    std::string_view line;
    if (!in.next_line(line) || line != kFlagsHeader)
        throw std::runtime_error(path + ": unexpected day-flags header");
    FlagTable flags;
    std::vector<std::string_view> f;
    while (in.next_line(line)) {
        if (line.empty()) continue;
        csv::split(line, f);
        if (f.size() != 4) throw std::runtime_error(path + ": malformed flag row");
        DayFlags df;
        df.day = std::string(f[0]);
        df.stock = std::string(f[1]);
        df.excluded = (f[2] == "1" || f[2] == "true");
        df.reason = std::string(f[3]);
        flags[DayKey{df.stock, df.day}] = df;
    }
    return flags;
}

void write_day_flags(const std::string& path, const FlagTable& flags) {
    csv::Writer out(path);
    out.raw_line(kFlagsHeader);
    for (const auto& [key, df] : flags) {
        out.field(df.day).field(df.stock).field(std::string_view(df.excluded ? "1" : "0")).field(df.reason);
        out.end_row();
    }
}

// -- Market-order stream -----------------------------------------------------

Stream build_market_order_stream(const std::vector<OrderEvent>& events,
                                 const DeskMap& desks, const FlagTable& flags,
                                 StreamBuildReport& report) {
    // Group execute events by (stock, day), preserving file order.
    std::map<DayKey, std::vector<const OrderEvent*>> days;
    for (const auto& ev : events) {
        if (ev.action != Action::Execute) continue;
        days[DayKey{ev.stock, ev.day}].push_back(&ev);
    }

    Stream stream;
    for (auto& [key, execs] : days) {
        if (auto it = flags.find(key); it != flags.end() && it->second.excluded) {
            ++report.excluded_days;
            continue;
        }
        bool missing_mid = false, nonmonotone = false;
        double prev_t = -1.0;
        std::vector<MarketOrderRecord> recs;
        recs.reserve(execs.size());
        int tick = 0;
        for (const OrderEvent* ev : execs) {
            if (!ev->best_bid || !ev->best_ask) {
                missing_mid = true;
                break;
            }
            if (ev->phys_time < prev_t) {
                nonmonotone = true;
                break;
            }
            prev_t = ev->phys_time;
            MarketOrderRecord r;
            r.day = ev->day;
            r.stock = ev->stock;
            r.tick = ++tick;
            r.phys_time = ev->phys_time;
            r.trader = desks.desk(ev->virtual_server);
            r.sign = (ev->side == Side::Buy) ? +1 : -1;
            r.volume = ev->volume;
            r.midprice = (*ev->best_bid + *ev->best_ask) / 2.0;
            recs.push_back(std::move(r));
        }
        if (missing_mid) {
            ++report.dropped_days_missing_midprice;
            report.derived_flags.push_back({key.day, key.stock, true, "missing_midprice"});
            continue;
        }
        if (nonmonotone) {
            ++report.dropped_days_nonmonotone_time;
            report.derived_flags.push_back({key.day, key.stock, true, "nonmonotone_time"});
            continue;
        }
        report.records += recs.size();
        stream.emplace(key, std::move(recs));
    }
    return stream;
}

Stream read_stream(const std::string& path, const FlagTable& flags, IngestReport& report) {
    csv::Reader in(path);
    std::string_view line;
    if (!in.next_line(line) || line != kStreamHeader)
        throw std::runtime_error(path + ": unexpected stream header");
    Stream stream;
    std::vector<std::string_view> f;
    while (in.next_line(line)) {
        if (line.empty()) continue;
        ++report.rows;
        csv::split(line, f);
        MarketOrderRecord r;
        int sign;
        bool ok = f.size() == 8;
        ok = ok && csv::parse_int(f[2], r.tick);
        ok = ok && csv::parse_double(f[3], r.phys_time);
        ok = ok && csv::parse_int(f[5], sign) && (sign == 1 || sign == -1);
        ok = ok && csv::parse_ll(f[6], r.volume) && r.volume > 0;
        ok = ok && csv::parse_double(f[7], r.midprice) && r.midprice > 0;
        if (!ok) {
            ++report.malformed;
            continue;
        }
        if (!in_continuous_session(r.phys_time)) {
            ++report.out_of_session;
            continue;
        }
        r.day = std::string(f[0]);
        r.stock = std::string(f[1]);
        r.trader = std::string(f[4]);
        r.sign = sign;
        DayKey key{r.stock, r.day};
        if (auto it = flags.find(key); it != flags.end() && it->second.excluded) continue;
        stream[key].push_back(std::move(r));
        ++report.events;
    }
    // Renumber ticks 1..N in file order per day and check time monotonicity.
    for (auto it = stream.begin(); it != stream.end();) {
        auto& recs = it->second;
        bool bad = false;
        for (size_t i = 0; i < recs.size(); ++i) {
            if (i > 0 && recs[i].phys_time < recs[i - 1].phys_time) bad = true;
            recs[i].tick = static_cast<int>(i) + 1;
        }
        if (bad) it = stream.erase(it);
        else ++it;
    }
    return stream;
}

void write_stream(const std::string& path, const Stream& stream) {
    csv::Writer out(path);
    out.raw_line(kStreamHeader);
    for (const auto& [key, recs] : stream) {
        for (const auto& r : recs) {
            out.field(r.day).field(r.stock).field(r.tick).field(r.phys_time)
               .field(r.trader).field(r.sign).field(r.volume).field(r.midprice);
            out.end_row();
        }
    }
}

} // namespace srl::orderflow
