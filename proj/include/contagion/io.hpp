#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace contagion::io {

// Shortest decimal form that round-trips; "inf" for +infinity.
std::string format_double(double x);

class CsvWriter {
 public:
  CsvWriter(const std::string& file, const std::vector<std::string>& header);

  template <typename... Ts>
  void row(const Ts&... fields) {
    std::size_t n = 0;
    ((put(fields, n++)), ...);
    out_ << '\n';
  }

 private:
  template <typename T>
  void put(const T& v, std::size_t n) {
    if (n) out_ << ',';
    if constexpr (std::is_floating_point_v<T>)
      out_ << format_double(static_cast<double>(v));
    else
      out_ << v;
  }

  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  std::size_t column(std::string_view name) const;
};

// Throws ParseError (with line) on ragged rows or unreadable files.
CsvTable read_csv(const std::string& file);

double parse_double(const std::string& s, std::size_t line);
long long parse_int(const std::string& s, std::size_t line);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace contagion::io
