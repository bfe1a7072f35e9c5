#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nphinfer/survdata.hpp"

namespace nphinfer {

// CSV with a header naming the columns time, event and group (any order,
// case-insensitive, extra columns ignored). event and group take 0/1.
// Blank lines are skipped. Throws CsvError carrying the 1-based line.
std::vector<SubjectRecord> parse_records_csv(std::istream& in);
std::vector<SubjectRecord> read_records_csv(const std::string& path);

// Writes with enough digits to round-trip every time exactly.
void write_records_csv(std::ostream& out, std::span<const SubjectRecord> records);

}  // namespace nphinfer
