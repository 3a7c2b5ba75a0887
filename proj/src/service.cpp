#include "spe/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <fstream>
#include <random>
#include <shared_mutex>
#include <sstream>

#include <json.hpp>

#include "spe/features.hpp"
#include "spe/pairing.hpp"

namespace spe {

Choice parse_choice(std::string_view text) {
  if (text == "A" || text == "a") return Choice::A;
  if (text == "B" || text == "b") return Choice::B;
  throw ValidationError("choice must be \"A\" or \"B\", got '" + std::string(text) + "'");
}

std::string_view to_string(SessionStatus status) {
  return status == SessionStatus::trained ? "trained" : "collecting";
}

// A registered backlog plus the featurizer fitted on all of its texts.
struct ServedDataset {
  ProjectDataset dataset;
  HashedTfidfModel featurizer;
  EmbeddingMatrix embeddings;
};

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string new_session_id() {
  static std::random_device device;
  static std::mutex mu;
  std::lock_guard lock(mu);
  const std::uint64_t v = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

class Journal {
 public:
  Journal() = default;
  explicit Journal(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  }
  ~Journal() {
    if (fd_ >= 0) ::close(fd_);
  }
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  // Returns once the record is on stable storage.
  void append(const nlohmann::ordered_json& record) {
    const std::string line = record.dump() + "\n";
    std::size_t done = 0;
    while (done < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("journal write failed for " + path_.string() + ": " + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError("fsync failed for " + path_.string() + ": " + std::strerror(errno));
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

void sync_directory(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

ItemCard card(const ProjectDataset& dataset, const std::string& id) {
  const BacklogItem* item = dataset.find(id);
  if (!item) throw NotFoundError("item '" + id + "' is not in the backlog");
  // Story points stay hidden from annotators.
  return {item->id, item->title, item->description};
}

}  // namespace

struct Session {
  std::string id;
  std::string dataset_name;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string created;
  std::shared_ptr<const ServedDataset> data;
  std::vector<UnlabeledPair> queue;

  mutable std::shared_mutex mu;
  std::deque<std::size_t> pending;  // unjudged pair indices in serving order
  std::vector<bool> judged;
  std::vector<Judgment> judgments;
  std::optional<TrainedModel> model;
  std::unique_ptr<Journal> journal;

  SessionInfo info_locked() const {
    return {id, dataset_name, k, seed, model ? SessionStatus::trained : SessionStatus::collecting, queue.size(),
            judgments.size()};
  }

  void check_index(std::size_t pair_index) const {
    if (pair_index >= queue.size()) {
      throw ValidationError("pair_index " + std::to_string(pair_index) + " is outside the queue of " +
                            std::to_string(queue.size()) + " pair(s)");
    }
  }

  void apply_judgment(Judgment j) {
    judged[j.pair_index] = true;
    pending.erase(std::find(pending.begin(), pending.end(), j.pair_index));
    judgments.push_back(std::move(j));
  }

  void apply_skip(std::size_t pair_index) {
    pending.erase(std::find(pending.begin(), pending.end(), pair_index));
    pending.push_back(pair_index);
  }
};

AnnotationService::AnnotationService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) throw ValidationError("service data directory is required");
  if (options_.feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (!(options_.training_timeout_seconds > 0.0)) throw ValidationError("training timeout must be positive");
  std::error_code ec;
  std::filesystem::create_directories(options_.data_dir, ec);
  if (ec) throw IoError("cannot create " + options_.data_dir.string() + ": " + ec.message());
}

AnnotationService::~AnnotationService() = default;

void AnnotationService::register_dataset(ProjectDataset dataset) {
  std::vector<std::string> texts;
  texts.reserve(dataset.size());
  for (const auto& item : dataset.items()) texts.push_back(item_text(item));
  auto featurizer = HashedTfidfModel::fit(texts, options_.feature_dim);
  auto embeddings = embed_items(featurizer, dataset.items());
  const std::string name = dataset.name();
  auto served = std::make_shared<const ServedDataset>(
      ServedDataset{std::move(dataset), std::move(featurizer), std::move(embeddings)});
  std::lock_guard lock(mutex_);
  if (datasets_.count(name)) throw ConflictError("dataset '" + name + "' is already registered");
  datasets_.emplace(name, std::move(served));
}

std::vector<std::string> AnnotationService::dataset_names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto& [name, _] : datasets_) names.push_back(name);
  return names;
}

std::shared_ptr<Session> AnnotationService::build_session(const std::string& id, const std::string& dataset,
                                                          std::size_t k, std::uint64_t seed,
                                                          std::string created) const {
  if (k == 0) throw ValidationError("k must be at least 1");
  std::shared_ptr<const ServedDataset> data;
  {
    std::lock_guard lock(mutex_);
    auto it = datasets_.find(dataset);
    if (it == datasets_.end()) throw NotFoundError("unknown dataset '" + dataset + "'");
    data = it->second;
  }
  auto s = std::make_shared<Session>();
  s->id = id;
  s->dataset_name = dataset;
  s->k = k;
  s->seed = seed;
  s->created = std::move(created);
  s->data = data;
  s->queue = generate_annotation_pairs(data->dataset.items(), k, seed);
  s->judged.assign(s->queue.size(), false);
  for (std::size_t i = 0; i < s->queue.size(); ++i) s->pending.push_back(i);
  return s;
}

SessionInfo AnnotationService::create_session(const std::string& dataset, std::size_t k, std::uint64_t seed) {
  std::string id;
  do {
    id = new_session_id();
  } while (std::filesystem::exists(options_.data_dir / (id + ".jsonl")));

  auto s = build_session(id, dataset, k, seed, utc_timestamp());
  s->journal = std::make_unique<Journal>(options_.data_dir / (id + ".jsonl"));
  nlohmann::ordered_json header;
  header["type"] = "session";
  header["session_id"] = s->id;
  header["dataset"] = s->dataset_name;
  header["k"] = s->k;
  header["seed"] = s->seed;
  header["created"] = s->created;
  s->journal->append(header);
  sync_directory(options_.data_dir);

  const auto info = s->info_locked();
  std::lock_guard lock(mutex_);
  sessions_.emplace(id, std::move(s));
  return info;
}

std::size_t AnnotationService::restore() {
  std::vector<std::filesystem::path> journals;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") journals.push_back(entry.path());
  }
  std::sort(journals.begin(), journals.end());

  std::size_t loaded = 0;
  for (const auto& path : journals) {
    const std::string id = path.stem().string();
    {
      std::lock_guard lock(mutex_);
      if (sessions_.count(id)) continue;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);

    std::shared_ptr<Session> s;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(lines[i]);
      } catch (const nlohmann::json::parse_error&) {
        // A crash mid-append leaves at most one torn, unacknowledged final record.
        if (i + 1 == lines.size()) break;
        throw FormatError(path.filename().string() + ": malformed journal record", i + 1);
      }
      try {
        const auto type = rec.at("type").get<std::string>();
        if (type == "session") {
          if (s) throw FormatError(path.filename().string() + ": repeated session header", i + 1);
          const auto dataset = rec.at("dataset").get<std::string>();
          {
            std::lock_guard lock(mutex_);
            if (!datasets_.count(dataset)) break;
          }
          s = build_session(rec.at("session_id").get<std::string>(), dataset, rec.at("k").get<std::size_t>(),
                            rec.at("seed").get<std::uint64_t>(), rec.value("created", std::string{}));
          if (s->id != id) throw FormatError(path.filename().string() + ": session id does not match file name", i + 1);
          continue;
        }
        if (!s) throw FormatError(path.filename().string() + ": record before session header", i + 1);
        if (type == "judgment") {
          Judgment j{rec.at("pair_index").get<std::size_t>(), rec.at("a").get<std::string>(),
                     rec.at("b").get<std::string>(), rec.at("y").get<int>(), rec.value("annotator", std::string{}),
                     rec.value("timestamp", std::string{})};
          s->check_index(j.pair_index);
          const auto& pair = s->queue[j.pair_index];
          if (pair.a != j.a || pair.b != j.b || (j.y != 1 && j.y != -1) || s->judged[j.pair_index]) {
            throw FormatError(path.filename().string() + ": judgment does not match the session queue", i + 1);
          }
          s->apply_judgment(std::move(j));
        } else if (type == "skip") {
          const auto index = rec.at("pair_index").get<std::size_t>();
          s->check_index(index);
          if (!s->judged[index]) s->apply_skip(index);
        } else if (type == "model") {
          s->model = TrainedModel::from_json(rec.at("model").dump());
        } else {
          throw FormatError(path.filename().string() + ": unknown record type '" + type + "'", i + 1);
        }
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.filename().string() + ": " + e.what(), i + 1);
      }
    }
    if (!s) continue;
    s->journal = std::make_unique<Journal>(path);
    std::lock_guard lock(mutex_);
    sessions_.emplace(id, std::move(s));
    ++loaded;
  }
  return loaded;
}

std::shared_ptr<Session> AnnotationService::find(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end() || !valid_session_id(session_id)) {
    throw NotFoundError("unknown session '" + session_id + "'");
  }
  return it->second;
}

SessionInfo AnnotationService::info(const std::string& session_id) const {
  auto s = find(session_id);
  std::shared_lock lock(s->mu);
  return s->info_locked();
}

std::vector<SessionInfo> AnnotationService::sessions() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, s] : sessions_) all.push_back(s);
  }
  std::vector<SessionInfo> out;
  for (const auto& s : all) {
    std::shared_lock lock(s->mu);
    out.push_back(s->info_locked());
  }
  return out;
}

NextPair AnnotationService::next_pair(const std::string& session_id) const {
  auto s = find(session_id);
  std::shared_lock lock(s->mu);
  NextPair out;
  out.judged = s->judgments.size();
  out.total = s->queue.size();
  if (!s->pending.empty()) {
    const std::size_t index = s->pending.front();
    const auto& pair = s->queue[index];
    out.pair = ServedPair{index, card(s->data->dataset, pair.a), card(s->data->dataset, pair.b)};
  }
  return out;
}

Judgment AnnotationService::submit_judgment(const std::string& session_id, std::size_t pair_index, Choice choice,
                                            const std::string& annotator) {
  auto s = find(session_id);
  std::unique_lock lock(s->mu);
  s->check_index(pair_index);
  if (s->judged[pair_index]) {
    throw ConflictError("pair " + std::to_string(pair_index) + " has already been judged");
  }
  const auto& pair = s->queue[pair_index];
  Judgment j{pair_index, pair.a, pair.b, choice_label(choice), annotator, utc_timestamp()};
  nlohmann::ordered_json rec;
  rec["type"] = "judgment";
  rec["pair_index"] = j.pair_index;
  rec["a"] = j.a;
  rec["b"] = j.b;
  rec["y"] = j.y;
  rec["annotator"] = j.annotator;
  rec["timestamp"] = j.timestamp;
  s->journal->append(rec);
  s->apply_judgment(j);
  return j;
}

void AnnotationService::skip(const std::string& session_id, std::size_t pair_index) {
  auto s = find(session_id);
  std::unique_lock lock(s->mu);
  s->check_index(pair_index);
  if (s->judged[pair_index]) {
    throw ConflictError("pair " + std::to_string(pair_index) + " has already been judged");
  }
  nlohmann::ordered_json rec;
  rec["type"] = "skip";
  rec["pair_index"] = pair_index;
  s->journal->append(rec);
  s->apply_skip(pair_index);
}

std::vector<Judgment> AnnotationService::judgments(const std::string& session_id) const {
  auto s = find(session_id);
  std::shared_lock lock(s->mu);
  return s->judgments;
}

TrainingSummary AnnotationService::train(const std::string& session_id, std::string_view overrides_json) {
  auto s = find(session_id);
  std::unique_lock lock(s->mu);
  if (s->judgments.empty()) throw ValidationError("session has no judgments to train on");

  TrainConfig defaults = TrainConfig::comparative_defaults(false);
  defaults.seed = s->seed;
  const TrainConfig config = apply_train_config_overrides(defaults, overrides_json);
  if (config.loss != LossKind::hinge_comparative) {
    throw ValidationError("session training uses the hinge-comparative loss");
  }
  if (config.early_stopping) throw ValidationError("session training has no validation pairs for early stopping");

  std::vector<ComparativePair> pairs;
  pairs.reserve(s->judgments.size());
  for (const auto& j : s->judgments) pairs.push_back({j.a, j.b, j.y});

  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(options_.training_timeout_seconds));
  auto model = train_comparative(pairs, s->data->embeddings, {}, config, std::nullopt,
                                 [&] { return std::chrono::steady_clock::now() > deadline; });
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json rec;
  rec["type"] = "model";
  rec["judgments"] = pairs.size();
  rec["model"] = nlohmann::ordered_json::parse(model.to_json());
  s->journal->append(rec);

  TrainingSummary summary{pairs.size(), model.train_loss, elapsed, model.config};
  s->model = std::move(model);
  return summary;
}

std::vector<RankedItem> AnnotationService::ranking(const std::string& session_id,
                                                   const std::vector<NewItem>& new_items) const {
  auto s = find(session_id);
  std::shared_lock lock(s->mu);
  if (!s->model) throw ConflictError("session has not been trained");
  const auto& data = *s->data;
  const auto& head = s->model->head;

  std::vector<RankedItem> out;
  out.reserve(data.dataset.size() + new_items.size());
  for (const auto& item : data.dataset.items()) {
    out.push_back({item.id, score(head, data.embeddings.row(item.id)), 0, false});
  }
  std::size_t generated = 0;
  for (const auto& item : new_items) {
    std::string id = item.id;
    if (id.empty()) {
      do {
        id = "new-" + std::to_string(++generated);
      } while (data.dataset.find(id) || std::any_of(out.begin(), out.end(), [&](const RankedItem& r) {
                 return r.id == id;
               }));
    } else if (std::any_of(out.begin(), out.end(), [&](const RankedItem& r) { return r.id == id; })) {
      throw ValidationError("new item id '" + id + "' is already in use");
    }
    BacklogItem b;
    b.title = item.title;
    b.description = item.description;
    const auto x = data.featurizer.embed(item_text(b));
    out.push_back({std::move(id), score(head, x), 0, true});
  }
  std::sort(out.begin(), out.end(), [](const RankedItem& x, const RankedItem& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

}  // namespace spe
