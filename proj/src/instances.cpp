#include "routeworks/instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "routeworks/rng.hpp"

namespace routeworks {

namespace {

double euclid(const NodeRec& a, const NodeRec& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

DistanceMatrix matrix_from_nodes(const std::vector<NodeRec>& nodes, Rounding r) {
    const int n = static_cast<int>(nodes.size());
    DistanceMatrix d(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double v = euclid(nodes[i], nodes[j]);
            if (r == Rounding::SolomonTrunc) v = std::floor(v * 10.0) / 10.0;
            d.at(i, j) = v;
            d.at(j, i) = v;
        }
    }
    return d;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_numbers(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(tok, &pos);
            if (pos != tok.size()) return false;
            out.push_back(v);
        } catch (const std::exception&) {
            return false;
        }
    }
    return !out.empty();
}

// Integral values print as integers so benchmark-style files stay clean;
// anything else gets round-trip-exact %.17g.
std::string fmt_num(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

DistanceMatrix travel_matrix(const Instance& inst, Rounding r) {
    return matrix_from_nodes(inst.nodes, r);
}

DistanceMatrix travel_matrix(const PdpInstance& inst, Rounding r) {
    return matrix_from_nodes(inst.nodes, r);
}

Instance parse_solomon(std::istream& in, int max_customers) {
    std::string line;
    int lineno = 0;
    std::string name;
    bool have_name = false;
    bool seen_vehicle = false;
    bool seen_customer = false;
    bool header_done = false;
    double capacity = -1.0;
    int vehicles = 0;
    std::vector<NodeRec> rows;
    std::set<long long> seen_ids;
    std::vector<double> nums;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (!have_name) {
            name = t;
            have_name = true;
            continue;
        }
        if (t == "VEHICLE") {
            seen_vehicle = true;
            continue;
        }
        if (t == "CUSTOMER") {
            seen_customer = true;
            continue;
        }
        if (!seen_customer) {
            // inside the vehicle header region: the sole numeric line is
            // "<count> <capacity>"
            if (parse_numbers(t, nums)) {
                if (nums.size() != 2) throw ParseError("malformed vehicle header", lineno);
                vehicles = static_cast<int>(nums[0]);
                capacity = nums[1];
            }
            continue;
        }
        if (!header_done) {
            // column header line(s) under CUSTOMER are non-numeric
            if (!parse_numbers(t, nums)) continue;
            header_done = true;
        } else if (!parse_numbers(t, nums)) {
            throw ParseError("malformed customer row", lineno);
        }
        if (nums.size() != 7) throw ParseError("malformed customer row: expected 7 fields", lineno);
        const long long id = static_cast<long long>(nums[0]);
        if (!seen_ids.insert(id).second) {
            throw ParseError("duplicate customer id " + std::to_string(id), lineno);
        }
        NodeRec rec;
        rec.id = static_cast<int>(id);
        rec.x = nums[1];
        rec.y = nums[2];
        rec.demand = nums[3];
        rec.tw_open = nums[4];
        rec.tw_close = nums[5];
        rec.service = nums[6];
        rows.push_back(rec);
    }

    if (!seen_vehicle || capacity < 0.0) throw ParseError("missing VEHICLE header", lineno);
    if (!seen_customer) throw ParseError("missing CUSTOMER header", lineno);

    const auto depot_it = std::find_if(rows.begin(), rows.end(),
                                       [](const NodeRec& r) { return r.id == 0; });
    if (depot_it == rows.end()) throw ParseError("missing depot row (customer 0)", lineno);

    Instance inst;
    inst.id = name;
    inst.capacity = capacity;
    inst.header_vehicles = vehicles;
    inst.nodes.push_back(*depot_it);
    int count = 0;
    for (const auto& r : rows) {
        if (r.id == 0) continue;
        if (max_customers >= 0 && count >= max_customers) break;
        NodeRec rec = r;
        rec.id = ++count;
        inst.nodes.push_back(rec);
    }
    NodeRec end_depot = *depot_it;
    end_depot.id = count + 1;
    inst.nodes.push_back(end_depot);
    return inst;
}

Instance parse_solomon_text(const std::string& text, int max_customers) {
    std::istringstream ss(text);
    return parse_solomon(ss, max_customers);
}

std::string serialize_solomon(const Instance& inst) {
    std::ostringstream out;
    out << inst.id << "\n\n";
    out << "VEHICLE\nNUMBER     CAPACITY\n";
    out << "  " << (inst.header_vehicles > 0 ? inst.header_vehicles : 25) << "         "
        << fmt_num(inst.capacity) << "\n\n";
    out << "CUSTOMER\n";
    out << "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n\n";
    const int n = inst.customers();
    for (int i = 0; i <= n; ++i) {
        const NodeRec& r = inst.nodes[i];
        out << "   " << i << "  " << fmt_num(r.x) << "  " << fmt_num(r.y) << "  "
            << fmt_num(r.demand) << "  " << fmt_num(r.tw_open) << "  "
            << fmt_num(r.tw_close) << "  " << fmt_num(r.service) << "\n";
    }
    return out.str();
}

PdpInstance parse_li_lim(std::istream& in, int max_requests) {
    std::string line;
    int lineno = 0;
    bool have_header = false;
    double capacity = -1.0;
    int vehicles = 0;
    std::vector<double> nums;

    struct RawRow {
        NodeRec rec;
        long long pick_partner;
        long long del_partner;
        int line;
    };
    std::map<long long, RawRow> rows;  // keyed by original id
    std::vector<long long> order;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (!parse_numbers(t, nums)) throw ParseError("malformed row", lineno);
        if (!have_header) {
            if (nums.size() != 3) throw ParseError("malformed header: expected <vehicles> <capacity> <speed>", lineno);
            vehicles = static_cast<int>(nums[0]);
            capacity = nums[1];
            have_header = true;
            continue;
        }
        if (nums.size() != 9) throw ParseError("malformed row: expected 9 fields", lineno);
        RawRow row;
        const long long id = static_cast<long long>(nums[0]);
        row.rec.id = static_cast<int>(id);
        row.rec.x = nums[1];
        row.rec.y = nums[2];
        row.rec.demand = nums[3];
        row.rec.tw_open = nums[4];
        row.rec.tw_close = nums[5];
        row.rec.service = nums[6];
        row.pick_partner = static_cast<long long>(nums[7]);
        row.del_partner = static_cast<long long>(nums[8]);
        row.line = lineno;
        if (!rows.emplace(id, row).second) {
            throw ParseError("duplicate customer id " + std::to_string(id), lineno);
        }
        order.push_back(id);
    }
    if (!have_header) throw ParseError("missing header", lineno);
    if (rows.find(0) == rows.end()) throw ParseError("missing depot row (id 0)", lineno);

    // Recover pickup/delivery pairs in order of pickup appearance.
    std::vector<std::pair<long long, long long>> pairs;
    for (const long long id : order) {
        if (id == 0) continue;
        const RawRow& row = rows.at(id);
        if (row.pick_partner == 0 && row.del_partner == 0) {
            throw ParseError("unpaired node " + std::to_string(id), row.line);
        }
        if (row.pick_partner != 0 && row.del_partner != 0) {
            throw ParseError("node " + std::to_string(id) + " claims both pairing roles", row.line);
        }
        if (row.del_partner != 0) {  // pickup row
            const auto it = rows.find(row.del_partner);
            if (it == rows.end()) {
                throw ParseError("node " + std::to_string(id) + " paired with missing node " +
                                     std::to_string(row.del_partner),
                                 row.line);
            }
            const RawRow& partner = it->second;
            if (partner.pick_partner != id) {
                throw ParseError("pairing cycle: node " + std::to_string(id) + " -> " +
                                     std::to_string(row.del_partner) + " -> " +
                                     std::to_string(partner.pick_partner),
                                 partner.line);
            }
            if (row.rec.demand <= 0.0) {
                throw ParseError("pickup " + std::to_string(id) + " must have positive demand", row.line);
            }
            if (std::abs(partner.rec.demand + row.rec.demand) > 1e-9) {
                throw ParseError("pair (" + std::to_string(id) + ", " + std::to_string(row.del_partner) +
                                     ") has mismatched demands",
                                 partner.line);
            }
            pairs.emplace_back(id, row.del_partner);
        }
    }
    // every non-depot row must appear in exactly one pair
    std::set<long long> in_pairs;
    for (const auto& [p, d] : pairs) {
        in_pairs.insert(p);
        in_pairs.insert(d);
    }
    for (const long long id : order) {
        if (id != 0 && in_pairs.find(id) == in_pairs.end()) {
            throw ParseError("unpaired node " + std::to_string(id), rows.at(id).line);
        }
    }

    if (max_requests >= 0 && static_cast<int>(pairs.size()) > max_requests) {
        pairs.resize(max_requests);
    }
    const int n_req = static_cast<int>(pairs.size());

    PdpInstance inst;
    inst.id = "li_lim";
    inst.capacity = capacity;
    inst.header_vehicles = vehicles;
    inst.nodes.resize(2 * n_req + 2);
    NodeRec depot = rows.at(0).rec;
    depot.id = 0;
    inst.nodes[0] = depot;
    for (int r = 0; r < n_req; ++r) {
        NodeRec p = rows.at(pairs[r].first).rec;
        NodeRec d = rows.at(pairs[r].second).rec;
        p.id = r + 1;
        d.id = r + 1 + n_req;
        inst.nodes[r + 1] = p;
        inst.nodes[r + 1 + n_req] = d;
    }
    depot.id = 2 * n_req + 1;
    inst.nodes[2 * n_req + 1] = depot;
    return inst;
}

PdpInstance parse_li_lim_text(const std::string& text, int max_requests) {
    std::istringstream ss(text);
    return parse_li_lim(ss, max_requests);
}

std::string serialize_li_lim(const PdpInstance& inst) {
    std::ostringstream out;
    out << (inst.header_vehicles > 0 ? inst.header_vehicles : 25) << "\t"
        << fmt_num(inst.capacity) << "\t1\n";
    const int n = inst.requests();
    auto row = [&](int idx, long long pick, long long del) {
        const NodeRec& r = inst.nodes[idx];
        out << idx << "\t" << fmt_num(r.x) << "\t" << fmt_num(r.y) << "\t" << fmt_num(r.demand)
            << "\t" << fmt_num(r.tw_open) << "\t" << fmt_num(r.tw_close) << "\t"
            << fmt_num(r.service) << "\t" << pick << "\t" << del << "\n";
    };
    row(0, 0, 0);
    for (int r = 1; r <= n; ++r) row(r, 0, r + n);
    for (int r = 1; r <= n; ++r) row(r + n, r, 0);
    return out.str();
}

namespace {

// Window placement band for a customer: service may start no earlier than
// reaching it from the depot at opening, and no later than what still allows
// the remaining chain back to the depot.
struct Band {
    double lo;
    double hi;
};

NodeRec sample_window(NodeRec rec, const Band& band, const GenProfile& p, Rng& rng) {
    const bool tight = rng.uniform() < p.p_tw;
    double half = rng.uniform(p.tw_width_min, p.tw_width_max) / 2.0;
    double center = rng.uniform(band.lo, band.hi);
    bool full = !tight;
    if (!full && p.integral) {
        const double lo = std::ceil(band.lo);
        const double hi = std::floor(band.hi);
        if (lo > hi) {
            full = true;  // band narrower than one time unit
        } else {
            half = std::max(1.0, std::round(half));
            center = std::min(std::max(std::round(center), lo), hi);
        }
    }
    if (full) {
        rec.tw_open = 0.0;
        rec.tw_close = p.horizon;
        return rec;
    }
    rec.tw_open = std::max(0.0, center - half);
    rec.tw_close = std::min(p.horizon, center + half);
    return rec;
}

double sample_coord(const GenProfile& p, Rng& rng) {
    const double c = rng.uniform(0.0, p.coord_scale);
    return p.integral ? std::round(c) : c;
}

}  // namespace

Instance generate_cvrptw(std::uint64_t seed, int n, const GenProfile& profile) {
    if (n < 1) throw GenerationError("generate_cvrptw: n must be >= 1");
    Rng rng(Rng::derive(seed, 0x6376));  // "cv"
    Instance inst;
    inst.id = "cvrptw-n" + std::to_string(n) + "-s" + std::to_string(seed);
    inst.capacity = profile.capacity;

    NodeRec depot;
    depot.id = 0;
    depot.x = sample_coord(profile, rng);
    depot.y = sample_coord(profile, rng);
    depot.tw_open = 0.0;
    depot.tw_close = profile.horizon;
    inst.nodes.push_back(depot);

    for (int i = 1; i <= n; ++i) {
        NodeRec rec;
        rec.id = i;
        rec.x = sample_coord(profile, rng);
        rec.y = sample_coord(profile, rng);
        rec.demand = static_cast<double>(rng.uniform_int(profile.demand_min, profile.demand_max));
        rec.service = profile.service;
        if (rec.demand > profile.capacity) {
            throw GenerationError("profile demand range exceeds capacity");
        }
        const double t0 = euclid(depot, rec);
        Band band{t0, profile.horizon - rec.service - t0};
        if (band.hi < band.lo) {
            throw GenerationError("profile horizon too short for customer service at distance " +
                                  std::to_string(t0));
        }
        rec = sample_window(rec, band, profile, rng);
        inst.nodes.push_back(rec);
    }

    depot.id = n + 1;
    inst.nodes.push_back(depot);
    return inst;
}

PdpInstance generate_pdptw(std::uint64_t seed, int n_requests, const GenProfile& profile) {
    if (n_requests < 1) throw GenerationError("generate_pdptw: n_requests must be >= 1");
    Rng rng(Rng::derive(seed, 0x7064));  // "pd"
    PdpInstance inst;
    inst.id = "cpdptw-n" + std::to_string(n_requests) + "-s" + std::to_string(seed);
    inst.capacity = profile.capacity;
    inst.nodes.resize(2 * n_requests + 2);

    NodeRec depot;
    depot.id = 0;
    depot.x = sample_coord(profile, rng);
    depot.y = sample_coord(profile, rng);
    depot.tw_open = 0.0;
    depot.tw_close = profile.horizon;
    inst.nodes[0] = depot;

    for (int r = 1; r <= n_requests; ++r) {
        NodeRec pick;
        pick.id = r;
        pick.x = sample_coord(profile, rng);
        pick.y = sample_coord(profile, rng);
        pick.demand = static_cast<double>(rng.uniform_int(profile.pd_demand_min, profile.pd_demand_max));
        pick.service = profile.service;
        if (pick.demand > profile.capacity) {
            throw GenerationError("profile demand range exceeds capacity");
        }

        NodeRec del;
        del.id = r + n_requests;
        del.x = sample_coord(profile, rng);
        del.y = sample_coord(profile, rng);
        del.demand = -pick.demand;
        del.service = profile.service;

        // The pickup band must leave room for the delivery leg and the
        // return to the depot, so the single-request route stays feasible.
        const double t0p = euclid(depot, pick);
        const double tpd = euclid(pick, del);
        const double td0 = euclid(del, depot);
        Band pick_band{t0p, profile.horizon - pick.service - tpd - del.service - td0};
        if (pick_band.hi < pick_band.lo) {
            throw GenerationError("profile horizon too short for request " + std::to_string(r));
        }
        pick = sample_window(pick, pick_band, profile, rng);

        const double earliest_pick = std::max(t0p, pick.tw_open);
        const double arr_del = earliest_pick + pick.service + tpd;
        Band del_band{arr_del, profile.horizon - del.service - td0};
        del = sample_window(del, del_band, profile, rng);

        inst.nodes[r] = pick;
        inst.nodes[r + n_requests] = del;
    }

    depot.id = 2 * n_requests + 1;
    inst.nodes[2 * n_requests + 1] = depot;
    return inst;
}

namespace {

void check_common(const std::vector<NodeRec>& nodes, double capacity,
                  std::vector<Violation>& out) {
    const int last = static_cast<int>(nodes.size()) - 1;
    for (int i = 0; i <= last; ++i) {
        const NodeRec& r = nodes[i];
        if (r.id != i) out.push_back({i, "node id mismatch (stored " + std::to_string(r.id) + ")"});
        if (r.tw_open > r.tw_close) out.push_back({i, "tw_open > tw_close"});
        if (r.service < 0.0) out.push_back({i, "negative service time"});
        if (r.demand > capacity) out.push_back({i, "demand exceeds capacity"});
    }
    for (const int d : {0, last}) {
        if (nodes[d].demand != 0.0) out.push_back({d, "depot demand must be 0"});
        if (nodes[d].service != 0.0) out.push_back({d, "depot service must be 0"});
    }
    if (nodes[0].x != nodes[last].x || nodes[0].y != nodes[last].y) {
        out.push_back({last, "end depot coordinates differ from start depot"});
    }
    if (nodes[0].tw_open != nodes[last].tw_open || nodes[0].tw_close != nodes[last].tw_close) {
        out.push_back({last, "end depot window differs from start depot"});
    }
}

}  // namespace

std::vector<Violation> validate_instance(const Instance& inst) {
    std::vector<Violation> out;
    if (inst.nodes.size() < 2) {
        out.push_back({-1, "instance must contain at least the two depot nodes"});
        return out;
    }
    check_common(inst.nodes, inst.capacity, out);

    const NodeRec& depot = inst.nodes[0];
    const int n = inst.customers();
    for (int i = 1; i <= n; ++i) {
        const NodeRec& r = inst.nodes[i];
        const double t0i = euclid(depot, r);
        // depot due date must admit serving i and returning
        const double need = depot.tw_open + std::max(t0i, r.tw_open) + r.service + t0i;
        if (depot.tw_close < need - 1e-9) {
            out.push_back({i, "depot due date below single-visit bound (" + std::to_string(need) + ")"});
        }
        if (depot.tw_open > r.tw_close - t0i + 1e-9) {
            out.push_back({i, "depot ready time above reachability bound"});
        }
    }
    return out;
}

std::vector<Violation> validate_instance(const PdpInstance& inst) {
    std::vector<Violation> out;
    if (inst.nodes.size() < 2 || inst.nodes.size() % 2 != 0) {
        out.push_back({-1, "pdp instance must have 2N+2 nodes"});
        return out;
    }
    check_common(inst.nodes, inst.capacity, out);

    const NodeRec& depot = inst.nodes[0];
    const int n = inst.requests();
    for (int r = 1; r <= n; ++r) {
        const NodeRec& p = inst.nodes[r];
        const NodeRec& d = inst.nodes[r + n];
        if (p.demand <= 0.0) out.push_back({r, "pickup demand must be positive"});
        if (std::abs(d.demand + p.demand) > 1e-9) {
            out.push_back({r + n, "delivery demand must negate its pickup"});
        }
        // single-request route 0 -> r -> r+N -> 2N+1 served at-earliest
        const double t0p = euclid(depot, p);
        double t = std::max(depot.tw_open + t0p, p.tw_open);
        if (t > p.tw_close + 1e-9) {
            out.push_back({r, "pickup unreachable within its window from depot"});
            continue;
        }
        t = std::max(t + p.service + euclid(p, d), d.tw_open);
        if (t > d.tw_close + 1e-9) {
            out.push_back({r + n, "delivery window closes before at-earliest arrival"});
            continue;
        }
        t += d.service + euclid(d, depot);
        if (t > depot.tw_close + 1e-9) {
            out.push_back({r + n, "single-request route misses depot due date"});
        }
    }
    return out;
}

}  // namespace routeworks
