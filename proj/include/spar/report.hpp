#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace spar {

// Self-describing run record: config echo plus hash, provenance, results,
// and a flat table for the csv form.
struct Report {
  nlohmann::json doc;
};

std::uint64_t fnv1a64(const std::string& text);

// Finite doubles stay numbers; non-finite values become null (the json
// format has no infinity).
nlohmann::json json_num(double v);

std::string to_json_string(const Report& rep);

// Flat render of doc["table"]: a header row from table.columns, then one
// line per row, numbers with 17 significant digits.
std::string to_csv_string(const Report& rep);

// format is "json" or "csv"; empty path writes to stdout.
void write_report(const Report& rep, const std::string& format, const std::string& path);

}  // namespace spar
