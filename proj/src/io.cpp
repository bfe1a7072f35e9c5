#include "nphinfer/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

#include "nphinfer/errors.hpp"

namespace nphinfer {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_number(const std::string& s, std::size_t line, const char* column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CsvError(line, std::string("column '") + column + "': not a number: '" + s + "'");
  }
  return v;
}

int to_flag(const std::string& s, std::size_t line, const char* column) {
  const double v = to_number(s, line, column);
  if (v != 0.0 && v != 1.0) {
    throw CsvError(line, std::string("column '") + column + "' must be 0 or 1, got '" + s + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

std::vector<SubjectRecord> parse_records_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::array<int, 3> col{-1, -1, -1};
  static constexpr std::array<const char*, 3> names{"time", "event", "group"};
  bool have_header = false;
  std::vector<SubjectRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (!have_header) {
      for (std::size_t j = 0; j < fields.size(); ++j) {
        std::string f = fields[j];
        std::transform(f.begin(), f.end(), f.begin(), [](unsigned char c) { return std::tolower(c); });
        for (std::size_t c = 0; c < names.size(); ++c) {
          if (f == names[c]) {
            if (col[c] >= 0) throw CsvError(lineno, std::string("duplicate column '") + names[c] + "'");
            col[c] = static_cast<int>(j);
          }
        }
      }
      for (std::size_t c = 0; c < names.size(); ++c) {
        if (col[c] < 0) throw CsvError(lineno, std::string("missing column '") + names[c] + "' in header");
      }
      have_header = true;
      continue;
    }
    const int needed = *std::max_element(col.begin(), col.end());
    if (static_cast<int>(fields.size()) <= needed) {
      throw CsvError(lineno, "expected at least " + std::to_string(needed + 1) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    SubjectRecord r;
    r.time = to_number(fields[static_cast<std::size_t>(col[0])], lineno, "time");
    if (!std::isfinite(r.time) || r.time < 0.0) throw CsvError(lineno, "time must be finite and non-negative");
    r.event = to_flag(fields[static_cast<std::size_t>(col[1])], lineno, "event") == 1;
    r.group = to_flag(fields[static_cast<std::size_t>(col[2])], lineno, "group");
    out.push_back(r);
  }
  if (!have_header) throw CsvError(lineno == 0 ? 1 : lineno, "empty input, no header");
  if (out.empty()) throw CsvError(lineno, "no data rows");
  return out;
}

std::vector<SubjectRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return parse_records_csv(in);
}

void write_records_csv(std::ostream& out, std::span<const SubjectRecord> records) {
  out << "time,event,group\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : records) out << r.time << ',' << (r.event ? 1 : 0) << ',' << r.group << '\n';
}

}  // namespace nphinfer
