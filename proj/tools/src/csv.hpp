#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace grpolab::cli {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double x);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view text);

/// Joins fields into one CRLF-terminated record.
std::string csv_record(const std::vector<std::string>& fields);

/// Splits one record (without its line break). Throws std::runtime_error on
/// an unterminated quote.
std::vector<std::string> parse_csv_record(std::string_view line);

/// Splits a whole file into records, accepting CRLF or LF line endings.
/// Quoted fields may contain line breaks.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace grpolab::cli
