#include "routeworks/report.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "routeworks/common.hpp"
#include "routeworks/instances.hpp"

namespace routeworks {

std::optional<BestKnown::Entry> BestKnown::lookup(const std::string& id) const {
    const auto it = table.find(id);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

BestKnown parse_best_known(const std::string& text) {
    BestKnown best;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        std::string id;
        BestKnown::Entry e;
        if (!(ls >> id >> e.vehicles >> e.distance)) {
            throw ParseError("malformed best-known row", lineno);
        }
        if (e.vehicles <= 0.0 || e.distance <= 0.0) {
            throw ParseError("best-known values must be positive", lineno);
        }
        if (!best.table.emplace(id, e).second) {
            throw ParseError("duplicate best-known id " + id, lineno);
        }
    }
    return best;
}

BestKnown load_best_known(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("load_best_known: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_best_known(ss.str());
}

std::optional<double> gap_percent(double distance, const BestKnown& best, const std::string& id) {
    const auto e = best.lookup(id);
    if (!e) return std::nullopt;
    return (distance - e->distance) / e->distance * 100.0;
}

std::string result_rows_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "id,vehicles,distance,gap_percent,seconds,feasible\n";
    out.precision(12);
    for (const auto& r : rows) {
        out << r.id << "," << r.vehicles << "," << r.distance << ",";
        if (r.gap_percent) out << *r.gap_percent;
        out << "," << r.seconds << "," << (r.feasible ? 1 : 0) << "\n";
    }
    return out.str();
}

std::vector<ResultRow> parse_result_rows_csv(const std::string& text) {
    std::vector<ResultRow> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("id,", 0) == 0) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 6) throw ParseError("malformed result row", lineno);
        ResultRow r;
        r.id = fields[0];
        r.vehicles = std::stoi(fields[1]);
        r.distance = std::stod(fields[2]);
        if (!fields[3].empty()) r.gap_percent = std::stod(fields[3]);
        r.seconds = std::stod(fields[4]);
        r.feasible = fields[5] == "1" || fields[5] == "true";
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string family_of(const std::string& id) {
    std::string low;
    for (const char c : id) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (low.rfind("lr", 0) == 0 || low.rfind("lc", 0) == 0 || low.rfind("lrc", 0) == 0) {
        // Li&Lim style: letters + series digit
        std::string fam;
        std::size_t i = 0;
        while (i < low.size() && std::isalpha(static_cast<unsigned char>(low[i]))) fam.push_back(low[i++]);
        if (i < low.size() && std::isdigit(static_cast<unsigned char>(low[i]))) fam.push_back(low[i]);
        return fam;
    }
    // Solomon style: leading letters (R, C, RC)
    std::string fam;
    for (const char c : id) {
        if (!std::isalpha(static_cast<unsigned char>(c))) break;
        fam.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return fam.empty() ? id : fam;
}

std::vector<FamilyRow> aggregate_by_family(const std::vector<ResultRow>& rows) {
    std::map<std::string, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) groups[family_of(r.id)].push_back(&r);
    std::vector<FamilyRow> out;
    for (const auto& [fam, members] : groups) {
        FamilyRow f;
        f.family = fam;
        f.count = static_cast<int>(members.size());
        double gap_sum = 0.0;
        int gap_count = 0;
        for (const ResultRow* r : members) {
            f.mean_distance += r->distance;
            f.mean_vehicles += r->vehicles;
            if (r->gap_percent) {
                gap_sum += *r->gap_percent;
                ++gap_count;
            }
        }
        f.mean_distance /= f.count;
        f.mean_vehicles /= f.count;
        if (gap_count == f.count && gap_count > 0) f.mean_gap_percent = gap_sum / gap_count;
        out.push_back(std::move(f));
    }
    return out;
}

std::string family_table_text(const std::vector<FamilyRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "family" << std::right << std::setw(7) << "count"
        << std::setw(14) << "distance" << std::setw(11) << "vehicles" << std::setw(10) << "gap%"
        << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(8) << r.family << std::right << std::setw(7) << r.count
            << std::setw(14) << std::fixed << std::setprecision(2) << r.mean_distance
            << std::setw(11) << std::setprecision(2) << r.mean_vehicles;
        if (r.mean_gap_percent) {
            out << std::setw(10) << std::setprecision(2) << *r.mean_gap_percent;
        } else {
            out << std::setw(10) << "-";
        }
        out << "\n";
        out.unsetf(std::ios::fixed);
    }
    return out.str();
}

std::string family_table_csv(const std::vector<FamilyRow>& rows) {
    std::ostringstream out;
    out << "family,count,mean_distance,mean_vehicles,mean_gap_percent\n";
    out.precision(12);
    for (const auto& r : rows) {
        out << r.family << "," << r.count << "," << r.mean_distance << "," << r.mean_vehicles
            << ",";
        if (r.mean_gap_percent) out << *r.mean_gap_percent;
        out << "\n";
    }
    return out.str();
}

}  // namespace routeworks
