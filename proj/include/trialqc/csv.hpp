#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Reads RFC 4180 comma-separated text with a header row. Quoted fields may
/// contain commas, doubled quotes and newlines. `name` only labels errors.
Table read(std::istream& in, const std::string& name);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

} // namespace trialqc::csv
