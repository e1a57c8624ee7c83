#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace routeworks {

// Literature reference values: instance id -> (vehicles, distance).
struct BestKnown {
    struct Entry {
        double vehicles = 0.0;
        double distance = 0.0;
    };
    std::map<std::string, Entry> table;

    std::optional<Entry> lookup(const std::string& id) const;
};

// CSV with '#' comment lines; columns: id,vehicles,distance.
BestKnown parse_best_known(const std::string& text);
BestKnown load_best_known(const std::string& path);

struct ResultRow {
    std::string id;
    int vehicles = 0;
    double distance = 0.0;
    std::optional<double> gap_percent;  // blank when no reference
    double seconds = 0.0;
    bool feasible = false;
};

std::optional<double> gap_percent(double distance, const BestKnown& best, const std::string& id);

std::string result_rows_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_result_rows_csv(const std::string& text);

// Instance family for aggregation: R/C/RC for Solomon-style ids, lr1/lr2 for
// Li&Lim-style ids.
std::string family_of(const std::string& id);

struct FamilyRow {
    std::string family;
    int count = 0;
    double mean_distance = 0.0;
    double mean_vehicles = 0.0;
    std::optional<double> mean_gap_percent;
};

std::vector<FamilyRow> aggregate_by_family(const std::vector<ResultRow>& rows);
std::string family_table_text(const std::vector<FamilyRow>& rows);
std::string family_table_csv(const std::vector<FamilyRow>& rows);

}  // namespace routeworks
