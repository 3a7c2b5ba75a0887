#include "spe/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "csv.hpp"
#include "spe/error.hpp"

namespace spe {

namespace {

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ValidationError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

constexpr const char* kFields[] = {"id", "title", "description", "story_point", "split"};

}  // namespace

StoryPoint::StoryPoint(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw ValidationError("story point with zero denominator");
  if (denominator < 0) {
    numerator = -numerator;
    denominator = -denominator;
  }
  const std::int64_t g = std::gcd(numerator, denominator);
  num_ = g ? numerator / g : 0;
  den_ = g ? denominator / g : 1;
}

StoryPoint StoryPoint::parse(std::string_view raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw ValidationError("empty story point");
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    return StoryPoint(parse_int(std::string_view(text).substr(0, slash)),
                      parse_int(std::string_view(text).substr(slash + 1)));
  }
  const auto dot = text.find('.');
  if (dot == std::string::npos) return StoryPoint(parse_int(text));

  std::string_view whole = std::string_view(text).substr(0, dot);
  std::string_view frac = std::string_view(text).substr(dot + 1);
  while (!frac.empty() && frac.back() == '0') frac.remove_suffix(1);
  if (frac.size() > 15) throw ValidationError("too many decimals: '" + text + "'");
  for (char c : frac) {
    if (c < '0' || c > '9') throw ValidationError("not a number: '" + text + "'");
  }
  bool negative = !whole.empty() && whole.front() == '-';
  if (negative || (!whole.empty() && whole.front() == '+')) whole.remove_prefix(1);
  const std::int64_t int_part = whole.empty() ? 0 : parse_int(whole);
  std::int64_t scale = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
  const std::int64_t frac_part = frac.empty() ? 0 : parse_int(frac);
  std::int64_t numerator = int_part * scale + frac_part;
  return StoryPoint(negative ? -numerator : numerator, scale);
}

std::string StoryPoint::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  std::int64_t d = den_;
  int twos = 0, fives = 0;
  while (d % 2 == 0) d /= 2, ++twos;
  while (d % 5 == 0) d /= 5, ++fives;
  if (d != 1) return std::to_string(num_) + "/" + std::to_string(den_);

  const int digits = std::max(twos, fives);
  std::int64_t scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  const std::int64_t scaled = num_ * (scale / den_);
  const std::int64_t magnitude = scaled < 0 ? -scaled : scaled;
  std::string frac = std::to_string(magnitude % scale);
  frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  return (scaled < 0 ? "-" : "") + std::to_string(magnitude / scale) + "." + frac;
}

std::strong_ordering operator<=>(const StoryPoint& a, const StoryPoint& b) {
  // Cross-multiply in 128 bits; denominators are positive.
  const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
  const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  if (text == "unassigned") return Split::unassigned;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "delimited-table" || text == "csv") return DatasetFormat::delimited_table;
  if (text == "json-lines" || text == "jsonl") return DatasetFormat::json_lines;
  throw ValidationError("unknown dataset format '" + std::string(text) + "'");
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? DatasetFormat::json_lines : DatasetFormat::delimited_table;
}

ProjectDataset::ProjectDataset(std::string name, std::vector<BacklogItem> items)
    : name_(std::move(name)), items_(std::move(items)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& item : items_) {
    if (item.id.empty()) throw ValidationError("item with empty id");
    if (!seen.insert(item.id).second) throw ValidationError("duplicate id '" + item.id + "'");
    if (item.story_point && *item.story_point <= StoryPoint(0)) {
      throw ValidationError("non-positive story point for '" + item.id + "'");
    }
  }
}

const BacklogItem* ProjectDataset::find(std::string_view id) const {
  for (const auto& item : items_) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

std::vector<BacklogItem> ProjectDataset::select(std::initializer_list<Split> splits, bool labeled_only) const {
  std::vector<BacklogItem> out;
  for (const auto& item : items_) {
    if (labeled_only && !item.labeled()) continue;
    for (Split s : splits) {
      if (item.split == s) {
        out.push_back(item);
        break;
      }
    }
  }
  return out;
}

namespace {

std::vector<BacklogItem> parse_table(std::string_view content) {
  const auto records = csv::parse(content);
  if (records.empty()) throw FormatError("missing header row", 1);

  int column[5] = {-1, -1, -1, -1, -1};
  const auto& header = records.front().fields;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    for (int f = 0; f < 5; ++f) {
      if (name == kFields[f]) {
        if (column[f] != -1) throw FormatError("duplicate column '" + name + "'", records.front().line);
        column[f] = static_cast<int>(c);
      }
    }
  }
  for (int f = 0; f < 5; ++f) {
    if (column[f] == -1) {
      throw FormatError(std::string("missing column '") + kFields[f] + "'", records.front().line);
    }
  }

  std::vector<BacklogItem> items;
  items.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw FormatError("expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(rec.fields.size()),
                        rec.line);
    }
    BacklogItem item;
    item.id = rec.fields[column[0]];
    item.title = rec.fields[column[1]];
    item.description = rec.fields[column[2]];
    try {
      if (const auto& sp = rec.fields[column[3]]; !trim(sp).empty()) item.story_point = StoryPoint::parse(sp);
      item.split = parse_split(trim(rec.fields[column[4]]));
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), rec.line);
    }
    items.push_back(std::move(item));
  }
  return items;
}

StoryPoint story_point_from_json(const nlohmann::json& value) {
  if (value.is_number_integer()) return StoryPoint(value.get<std::int64_t>());
  if (value.is_string()) return StoryPoint::parse(value.get<std::string>());
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw ValidationError("non-finite story point");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return StoryPoint::parse(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
  }
  throw ValidationError("story_point must be a number, string or null");
}

std::vector<BacklogItem> parse_json_lines(std::string_view content) {
  std::vector<BacklogItem> items;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    const std::string line = trim(content.substr(start, end - start));
    start = end + 1;
    if (line.empty()) {
      if (end == content.size()) break;
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(e.what(), line_no);
    }
    if (!obj.is_object()) throw FormatError("expected a JSON object", line_no);
    for (const char* key : kFields) {
      if (!obj.contains(key)) throw FormatError(std::string("missing key '") + key + "'", line_no);
    }
    BacklogItem item;
    try {
      item.id = obj.at("id").get<std::string>();
      item.title = obj.at("title").get<std::string>();
      item.description = obj.at("description").is_null() ? "" : obj.at("description").get<std::string>();
      if (!obj.at("story_point").is_null()) item.story_point = story_point_from_json(obj.at("story_point"));
      item.split = parse_split(obj.at("split").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), line_no);
    }
    items.push_back(std::move(item));
    if (end == content.size()) break;
  }
  return items;
}

}  // namespace

ProjectDataset parse_project(std::string_view content, DatasetFormat format, std::string name) {
  auto items = format == DatasetFormat::json_lines ? parse_json_lines(content) : parse_table(content);
  return ProjectDataset(std::move(name), std::move(items));
}

ProjectDataset load_project(const std::filesystem::path& path, DatasetFormat format) {
  return parse_project(read_file(path), format, path.stem().string());
}

ProjectDataset load_project(const std::filesystem::path& path) {
  return load_project(path, format_from_path(path));
}

std::string serialize_project(const ProjectDataset& dataset, DatasetFormat format) {
  std::string out;
  if (format == DatasetFormat::delimited_table) {
    out = csv::join({kFields[0], kFields[1], kFields[2], kFields[3], kFields[4]}) + "\n";
    for (const auto& item : dataset.items()) {
      out += csv::join({item.id, item.title, item.description,
                        item.story_point ? item.story_point->to_string() : std::string(),
                        std::string(to_string(item.split))});
      out += '\n';
    }
    return out;
  }
  for (const auto& item : dataset.items()) {
    nlohmann::ordered_json obj;
    obj["id"] = item.id;
    obj["title"] = item.title;
    obj["description"] = item.description;
    if (!item.story_point) {
      obj["story_point"] = nullptr;
    } else if (item.story_point->denominator() == 1) {
      obj["story_point"] = item.story_point->numerator();
    } else {
      // Strings keep non-integral rationals exact.
      obj["story_point"] = item.story_point->to_string();
    }
    obj["split"] = std::string(to_string(item.split));
    out += obj.dump() + "\n";
  }
  return out;
}

void save_project(const ProjectDataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_project(dataset, format);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string item_text(const BacklogItem& item) {
  if (item.title.empty()) return item.description;
  if (item.description.empty()) return item.title;
  return item.title + " " + item.description;
}

DatasetSummary summarize(const ProjectDataset& dataset) {
  DatasetSummary s;
  s.n = dataset.size();
  for (const auto& item : dataset.items()) {
    switch (item.split) {
      case Split::train: ++s.train; break;
      case Split::validation: ++s.validation; break;
      case Split::test: ++s.test; break;
      case Split::unassigned: ++s.unassigned; break;
    }
    if (!item.story_point) continue;
    if (s.labeled == 0 || *item.story_point < s.min_sp) s.min_sp = *item.story_point;
    if (s.labeled == 0 || *item.story_point > s.max_sp) s.max_sp = *item.story_point;
    ++s.labeled;
  }
  if (s.labeled == 0) throw ValidationError("dataset '" + dataset.name() + "' has no labeled items");
  return s;
}

}  // namespace spe
