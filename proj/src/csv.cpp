#include "csv.hpp"

#include "spe/error.hpp"

namespace spe::csv {

std::vector<Record> parse(std::string_view content) {
  std::vector<Record> records;
  Record current;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t size = content.size();

  // Skip a UTF-8 byte order mark.
  if (content.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  bool field_started = false;
  current.line = line;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    const bool blank = current.fields.size() == 1 && current.fields.front().empty();
    if (!blank) records.push_back(std::move(current));
    current = Record{};
  };

  while (i < size) {
    const char c = content[i];
    if (c == '"' && !field_started && field.empty()) {
      const std::size_t quote_line = line;
      ++i;
      for (;;) {
        if (i >= size) throw FormatError("unterminated quoted field", quote_line);
        const char q = content[i];
        if (q == '"') {
          if (i + 1 < size && content[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (q == '\n') ++line;
        field.push_back(q);
        ++i;
      }
      field_started = true;
      if (i < size && content[i] != ',' && content[i] != '\n' && content[i] != '\r') {
        throw FormatError("unexpected character after closing quote", line);
      }
      continue;
    }
    if (c == ',') {
      end_field();
      field_started = false;
      ++i;
      continue;
    }
    if (c == '\r' || c == '\n') {
      end_field();
      end_record();
      if (c == '\r' && i + 1 < size && content[i + 1] == '\n') ++i;
      ++i;
      ++line;
      current.line = line;
      continue;
    }
    field.push_back(c);
    field_started = true;
    ++i;
  }
  if (field_started || !field.empty() || !current.fields.empty()) {
    end_field();
    end_record();
  }
  return records;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace spe::csv
