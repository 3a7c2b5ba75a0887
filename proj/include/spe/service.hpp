#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spe/dataset.hpp"
#include "spe/error.hpp"
#include "spe/models.hpp"

namespace spe {

enum class Choice { A, B };

Choice parse_choice(std::string_view text);
// A means item A needs more effort (y = +1), B the opposite (y = -1).
inline int choice_label(Choice c) { return c == Choice::A ? 1 : -1; }

enum class SessionStatus { collecting, trained };
std::string_view to_string(SessionStatus status);

struct Judgment {
  std::size_t pair_index = 0;
  std::string a;
  std::string b;
  int y = 1;
  std::string annotator;
  std::string timestamp;
};

struct SessionInfo {
  std::string session_id;
  std::string dataset;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  SessionStatus status = SessionStatus::collecting;
  std::size_t total = 0;
  std::size_t judged = 0;
};

struct ItemCard {
  std::string id;
  std::string title;
  std::string description;
};

struct ServedPair {
  std::size_t pair_index = 0;
  ItemCard item_a;
  ItemCard item_b;
};

struct NextPair {
  std::optional<ServedPair> pair;  // empty once every pair is judged
  std::size_t judged = 0;
  std::size_t total = 0;
};

struct TrainingSummary {
  std::size_t judgments = 0;
  std::vector<double> train_loss;  // one entry per epoch
  double elapsed_seconds = 0.0;
  TrainConfig config;
};

struct NewItem {
  std::string id;  // generated when empty
  std::string title;
  std::string description;
};

struct RankedItem {
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;
  bool is_new = false;
};

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::size_t feature_dim = kDefaultFeatureDim;
  double training_timeout_seconds = 60.0;
};

struct Session;
struct ServedDataset;

// Annotation workflow over registered datasets. Every session is journaled
// to <data_dir>/<session_id>.jsonl; judgments are fsync'd before they are
// acknowledged and the journal is replayed on construction.
//
// Writes to one session are serialized; reads take a shared lock and see
// a consistent prefix of the judgment log.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Datasets must be registered before sessions referring to them are
  // restored; call restore() after registering.
  void register_dataset(ProjectDataset dataset);
  std::vector<std::string> dataset_names() const;

  // Replays every journal in data_dir. Journals naming an unregistered
  // dataset are skipped. Returns the number of sessions loaded.
  std::size_t restore();

  SessionInfo create_session(const std::string& dataset, std::size_t k, std::uint64_t seed);
  SessionInfo info(const std::string& session_id) const;
  std::vector<SessionInfo> sessions() const;

  NextPair next_pair(const std::string& session_id) const;
  Judgment submit_judgment(const std::string& session_id, std::size_t pair_index, Choice choice,
                           const std::string& annotator = "");
  // Moves an unjudged pair to the end of the queue.
  void skip(const std::string& session_id, std::size_t pair_index);

  std::vector<Judgment> judgments(const std::string& session_id) const;

  // `overrides_json` holds TrainConfig fields; empty for the defaults.
  // Throws TrainingCancelled past the configured timeout.
  TrainingSummary train(const std::string& session_id, std::string_view overrides_json = {});
  std::vector<RankedItem> ranking(const std::string& session_id, const std::vector<NewItem>& new_items = {}) const;

 private:
  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::shared_ptr<Session> build_session(const std::string& id, const std::string& dataset, std::size_t k,
                                         std::uint64_t seed, std::string created) const;

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ServedDataset>> datasets_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace spe
