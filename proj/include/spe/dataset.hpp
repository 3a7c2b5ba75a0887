#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spe {

// Exact non-negative rational story point. Always kept in lowest terms with
// a positive denominator so equality is structural.
class StoryPoint {
 public:
  StoryPoint() = default;
  StoryPoint(std::int64_t numerator, std::int64_t denominator = 1);

  // Accepts "3", "0.5", "13.25" and "7/2".
  static StoryPoint parse(std::string_view text);

  std::int64_t numerator() const { return num_; }
  std::int64_t denominator() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Shortest exact rendering: integer, terminating decimal, or "p/q".
  std::string to_string() const;

  friend bool operator==(const StoryPoint&, const StoryPoint&) = default;
  friend std::strong_ordering operator<=>(const StoryPoint& a, const StoryPoint& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

enum class Split { train, validation, test, unassigned };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct BacklogItem {
  std::string id;
  std::string title;
  std::string description;
  std::optional<StoryPoint> story_point;
  Split split = Split::unassigned;

  bool labeled() const { return story_point.has_value(); }
  double sp() const { return story_point->value(); }

  friend bool operator==(const BacklogItem&, const BacklogItem&) = default;
};

enum class DatasetFormat { delimited_table, json_lines };

DatasetFormat parse_dataset_format(std::string_view text);
// Guesses from the extension: .jsonl/.json -> json_lines, anything else delimited.
DatasetFormat format_from_path(const std::filesystem::path& path);

// An immutable, validated project backlog.
class ProjectDataset {
 public:
  // Throws ValidationError on empty/duplicate ids or non-positive story points.
  ProjectDataset(std::string name, std::vector<BacklogItem> items);

  const std::string& name() const { return name_; }
  const std::vector<BacklogItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  const BacklogItem* find(std::string_view id) const;

  // Items in `splits`, in file order; labeled_only drops items without story points.
  std::vector<BacklogItem> select(std::initializer_list<Split> splits, bool labeled_only = true) const;

 private:
  std::string name_;
  std::vector<BacklogItem> items_;
};

ProjectDataset load_project(const std::filesystem::path& path, DatasetFormat format);
ProjectDataset load_project(const std::filesystem::path& path);

// Parses from an in-memory buffer; `name` becomes the dataset name.
ProjectDataset parse_project(std::string_view content, DatasetFormat format, std::string name);

std::string serialize_project(const ProjectDataset& dataset, DatasetFormat format);
void save_project(const ProjectDataset& dataset, const std::filesystem::path& path, DatasetFormat format);

// Title and description joined by a single space, with no dangling separator.
std::string item_text(const BacklogItem& item);

struct DatasetSummary {
  std::size_t n = 0;
  std::size_t labeled = 0;
  StoryPoint min_sp;
  StoryPoint max_sp;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t unassigned = 0;
};

// Throws ValidationError when no item carries a story point.
DatasetSummary summarize(const ProjectDataset& dataset);

}  // namespace spe
