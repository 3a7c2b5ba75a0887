#pragma once

// Minimal RFC 4180 reader/writer used by the dataset and report code.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace spe::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Splits `content` into records. Accepts LF or CRLF line endings, quoted
// fields with embedded separators/newlines and doubled quotes. Blank lines
// are skipped. Throws FormatError on an unterminated quote or on stray
// characters after a closing quote.
std::vector<Record> parse(std::string_view content);

// Quotes the field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

}  // namespace spe::csv
