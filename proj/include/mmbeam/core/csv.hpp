#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmbeam {

// Shortest round-trip decimal rendering; identical bytes for identical values.
inline std::string fmt_num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_num(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_num(int v) { return std::to_string(v); }
inline std::string fmt_num(long v) { return std::to_string(v); }

inline double parse_double(const std::string& s, bool* ok = nullptr) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  bool good = res.ec == std::errc() && res.ptr == s.data() + s.size();
  if (ok != nullptr) {
    *ok = good;
    return good ? v : 0.0;
  }
  if (!good) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, bool* ok = nullptr) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  bool good = res.ec == std::errc() && res.ptr == s.data() + s.size();
  if (ok != nullptr) {
    *ok = good;
    return good ? v : 0;
  }
  if (!good) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

// Minimal CSV: comma-separated, no quoting (no field written by this project
// contains a comma), lines end with '\n'.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : os_(path) {
    if (!os_) throw std::runtime_error("cannot write " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
};

}  // namespace mmbeam
