#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace entailnet::csv {

/// Reads comma-separated records with RFC 4180 double-quote escaping.
/// Blank lines are skipped; a UTF-8 byte-order mark on the first line is dropped.
class Reader {
 public:
  explicit Reader(std::istream& in);

  /// Next record, or nullopt at end of input.
  std::optional<std::vector<std::string>> next();

  /// 1-based line number where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

/// Quotes a field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double value);

/// Whole-string numeric parse; rejects trailing garbage, nan and inf.
std::optional<double> parse_double(std::string_view text);

}  // namespace entailnet::csv
