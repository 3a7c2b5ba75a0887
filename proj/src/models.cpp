#include "spe/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "spe/error.hpp"
#include "spe/random.hpp"

namespace spe {

namespace {

double dot(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_dim(const ScoringHead& head, std::size_t n) {
  if (head.dim() != n) {
    throw ValidationError("dimension mismatch: head has " + std::to_string(head.dim()) + ", input has " +
                          std::to_string(n));
  }
}

struct PairRow {
  const double* a;
  const double* b;
  int y;
};

struct ItemRow {
  const double* x;
  double sp;
};

std::vector<PairRow> resolve(const EmbeddingMatrix& emb, std::span<const ComparativePair> pairs) {
  std::vector<PairRow> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.y != 1 && p.y != -1) throw ValidationError("pair label must be +1 or -1");
    rows.push_back({emb.row(p.a).data(), emb.row(p.b).data(), p.y});
  }
  return rows;
}

std::vector<ItemRow> resolve(const EmbeddingMatrix& emb, std::span<const LabeledExample> items) {
  std::vector<ItemRow> rows;
  rows.reserve(items.size());
  for (const auto& it : items) rows.push_back({emb.row(it.id).data(), it.sp});
  return rows;
}

// Batch objectives over resolved rows. Each accumulates into `out.grad_w`,
// which must be sized to the head dimension.
void hinge_pairs(const ScoringHead& head, std::span<const PairRow> batch, LossGradient& out) {
  const std::size_t dim = head.dim();
  std::fill(out.grad_w.begin(), out.grad_w.end(), 0.0);
  out.loss = 0.0;
  out.grad_b = 0.0;
  if (batch.empty()) return;
  for (const auto& p : batch) {
    const double y_hat = dot(head.w, p.a) - dot(head.w, p.b);
    const double margin = 1.0 - p.y * y_hat;
    if (margin > 0.0) {
      out.loss += margin;
      for (std::size_t j = 0; j < dim; ++j) out.grad_w[j] -= p.y * (p.a[j] - p.b[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& g : out.grad_w) g *= inv;
}

void absolute_error(const ScoringHead& head, std::span<const ItemRow> batch, LossGradient& out) {
  const std::size_t dim = head.dim();
  std::fill(out.grad_w.begin(), out.grad_w.end(), 0.0);
  out.loss = 0.0;
  out.grad_b = 0.0;
  if (batch.empty()) return;
  for (const auto& item : batch) {
    const double residual = item.sp - (dot(head.w, item.x) + head.b);
    out.loss += std::abs(residual);
    const double sign = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
    if (sign == 0.0) continue;
    for (std::size_t j = 0; j < dim; ++j) out.grad_w[j] -= sign * item.x[j];
    out.grad_b -= sign;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.grad_b *= inv;
  for (auto& g : out.grad_w) g *= inv;
}

void add_l2(const ScoringHead& head, double l2, LossGradient& out) {
  if (l2 == 0.0) return;
  double sq = 0.0;
  for (std::size_t j = 0; j < head.dim(); ++j) {
    sq += head.w[j] * head.w[j];
    out.grad_w[j] += 2.0 * l2 * head.w[j];
  }
  out.loss += l2 * sq;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t dim)
      : config_(config), m_w_(dim, 0.0), v_w_(dim, 0.0) {}

  void step(ScoringHead& head, const LossGradient& g, double lr, bool update_bias) {
    if (config_.optimizer == OptimizerKind::sgd) {
      for (std::size_t j = 0; j < head.dim(); ++j) head.w[j] -= lr * g.grad_w[j];
      if (update_bias) head.b -= lr * g.grad_b;
      return;
    }
    ++t_;
    const double b1 = config_.adam_beta1, b2 = config_.adam_beta2, eps = config_.adam_epsilon;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t j = 0; j < head.dim(); ++j) {
      m_w_[j] = b1 * m_w_[j] + (1.0 - b1) * g.grad_w[j];
      v_w_[j] = b2 * v_w_[j] + (1.0 - b2) * g.grad_w[j] * g.grad_w[j];
      head.w[j] -= lr * (m_w_[j] / c1) / (std::sqrt(v_w_[j] / c2) + eps);
    }
    if (update_bias) {
      m_b_ = b1 * m_b_ + (1.0 - b1) * g.grad_b;
      v_b_ = b2 * v_b_ + (1.0 - b2) * g.grad_b * g.grad_b;
      head.b -= lr * (m_b_ / c1) / (std::sqrt(v_b_ / c2) + eps);
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<double> m_w_, v_w_;
  double m_b_ = 0.0, v_b_ = 0.0;
  std::uint64_t t_ = 0;
};

// Shared minibatch loop. `objective(head, batch_indices, grad)` fills the
// batch objective; `validate(head)` returns the validation loss when early
// stopping is active.
template <typename Objective, typename Validate>
TrainedModel run_training(std::size_t n_examples, const TrainConfig& config, ScoringHead head, bool update_bias,
                          Objective&& objective, Validate&& validate, const StopRequested& stop = {}) {
  TrainedModel model;
  model.config = config;
  model.head = std::move(head);
  if (config.max_epochs == 0 || n_examples == 0) return model;

  Rng rng(derive_seed(config.seed, 0x5348'5546ULL));
  Optimizer optimizer(config, model.head.dim());
  std::vector<std::size_t> order(n_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  LossGradient grad;
  grad.grad_w.assign(model.head.dim(), 0.0);

  ScoringHead best_head = model.head;
  double best_val = INFINITY;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (stop && stop()) throw TrainingCancelled("training stopped after " + std::to_string(epoch) + " epoch(s)");
    rng.shuffle(std::span<std::size_t>(order));
    const double lr = learning_rate(config, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_examples; start += config.batch_size) {
      const std::size_t end = std::min(n_examples, start + config.batch_size);
      objective(model.head, std::span<const std::size_t>(order).subspan(start, end - start), grad);
      epoch_loss += grad.loss * static_cast<double>(end - start);
      optimizer.step(model.head, grad, lr, update_bias);
    }
    model.train_loss.push_back(epoch_loss / static_cast<double>(n_examples));

    if (config.early_stopping) {
      const double val = validate(model.head);
      model.validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best_head = model.head;
        model.best_epoch = static_cast<long>(epoch);
        since_best = 0;
      } else if (++since_best >= config.early_stopping->patience) {
        break;
      }
    } else {
      model.best_epoch = static_cast<long>(epoch);
    }
  }
  if (config.early_stopping) model.head = std::move(best_head);
  return model;
}

ScoringHead initial_head(const std::optional<ScoringHead>& init, std::size_t dim) {
  if (!init) return ScoringHead(dim);
  require_dim(*init, dim);
  return *init;
}

void require_loss(const TrainConfig& config, LossKind expected) {
  config.validate();
  if (config.loss != expected) {
    throw ValidationError("config loss is " + std::string(to_string(config.loss)) + ", expected " +
                          std::string(to_string(expected)));
  }
}

}  // namespace

double score(const ScoringHead& head, std::span<const double> x) {
  require_dim(head, x.size());
  return dot(head.w, x.data()) + head.b;
}

double comparative_forward(const ScoringHead& head, std::span<const double> x_a, std::span<const double> x_b) {
  require_dim(head, x_a.size());
  require_dim(head, x_b.size());
  return dot(head.w, x_a.data()) - dot(head.w, x_b.data());
}

double hinge_loss(int y, double y_hat) { return std::max(0.0, 1.0 - y * y_hat); }

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::hinge_comparative: return "hinge-comparative";
    case LossKind::mae_regression: return "mae-regression";
    case LossKind::hinge_svm_difference: return "hinge-svm-difference";
  }
  return "hinge-comparative";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "hinge-comparative") return LossKind::hinge_comparative;
  if (text == "mae-regression") return LossKind::mae_regression;
  if (text == "hinge-svm-difference") return LossKind::hinge_svm_difference;
  throw ValidationError("unknown loss '" + std::string(text) + "'");
}

std::string_view to_string(OptimizerKind optimizer) { return optimizer == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw ValidationError("unknown optimizer '" + std::string(text) + "'");
}

TrainConfig TrainConfig::regression_defaults() {
  TrainConfig c;
  c.loss = LossKind::mae_regression;
  c.max_epochs = 600;
  return c;
}

TrainConfig TrainConfig::comparative_defaults(bool with_validation) {
  TrainConfig c;
  c.loss = LossKind::hinge_comparative;
  c.max_epochs = with_validation ? 300 : 100;
  if (with_validation) c.early_stopping = EarlyStopping{};
  return c;
}

TrainConfig TrainConfig::svm_defaults() {
  TrainConfig c;
  c.loss = LossKind::hinge_svm_difference;
  c.max_epochs = 100;
  c.l2_penalty = 1e-4;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw ValidationError("learning rates must be positive");
  if (lr_end > lr_start) throw ValidationError("lr_end must not exceed lr_start");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (l2_penalty < 0.0) throw ValidationError("l2_penalty must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("adam_epsilon must be positive");
  if (early_stopping && early_stopping->patience == 0) throw ValidationError("patience must be positive");
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  if (config.max_epochs <= 1) return config.lr_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.max_epochs - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, t);
}

LossGradient comparative_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                                   std::span<const ComparativePair> batch) {
  require_dim(head, emb.dim());
  LossGradient out;
  out.grad_w.assign(head.dim(), 0.0);
  const auto rows = resolve(emb, batch);
  hinge_pairs(head, rows, out);
  return out;
}

LossGradient regression_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                                  std::span<const LabeledExample> batch) {
  require_dim(head, emb.dim());
  LossGradient out;
  out.grad_w.assign(head.dim(), 0.0);
  const auto rows = resolve(emb, batch);
  absolute_error(head, rows, out);
  return out;
}

LossGradient svm_objective(const ScoringHead& head, const EmbeddingMatrix& emb,
                           std::span<const ComparativePair> batch, double l2_penalty) {
  LossGradient out = comparative_objective(head, emb, batch);
  add_l2(head, l2_penalty, out);
  return out;
}

double mean_hinge_loss(const ScoringHead& head, const EmbeddingMatrix& emb, std::span<const ComparativePair> pairs) {
  if (pairs.empty()) return 0.0;
  return comparative_objective(head, emb, pairs).loss;
}

TrainedModel train_comparative(std::span<const ComparativePair> pairs, const EmbeddingMatrix& emb,
                               std::span<const ComparativePair> val_pairs, const TrainConfig& config,
                               std::optional<ScoringHead> init, const StopRequested& stop) {
  require_loss(config, LossKind::hinge_comparative);
  if (config.early_stopping && val_pairs.empty()) {
    throw ValidationError("early stopping requires validation pairs");
  }
  const auto rows = resolve(emb, pairs);
  const auto val_rows = resolve(emb, val_pairs);
  std::vector<PairRow> batch;
  LossGradient val_grad;
  val_grad.grad_w.assign(emb.dim(), 0.0);
  // The bias cancels in the score difference, so it is never updated.
  return run_training(
      rows.size(), config, initial_head(init, emb.dim()), /*update_bias=*/false,
      [&](const ScoringHead& head, std::span<const std::size_t> idx, LossGradient& g) {
        batch.clear();
        for (auto i : idx) batch.push_back(rows[i]);
        hinge_pairs(head, batch, g);
      },
      [&](const ScoringHead& head) {
        hinge_pairs(head, val_rows, val_grad);
        return val_grad.loss;
      },
      stop);
}

TrainedModel train_regression(std::span<const BacklogItem> items, const EmbeddingMatrix& emb,
                              const TrainConfig& config, std::optional<ScoringHead> init) {
  require_loss(config, LossKind::mae_regression);
  if (config.early_stopping) throw ValidationError("regression training does not use a validation set");
  std::vector<ItemRow> rows;
  rows.reserve(items.size());
  for (const auto& item : items) {
    if (!item.labeled()) throw ValidationError("item '" + item.id + "' has no story point");
    rows.push_back({emb.row(item.id).data(), item.sp()});
  }
  std::vector<ItemRow> batch;
  return run_training(
      rows.size(), config, initial_head(init, emb.dim()), /*update_bias=*/true,
      [&](const ScoringHead& head, std::span<const std::size_t> idx, LossGradient& g) {
        batch.clear();
        for (auto i : idx) batch.push_back(rows[i]);
        absolute_error(head, batch, g);
      },
      [](const ScoringHead&) { return 0.0; });
}

TrainedModel train_svm_comparative(std::span<const ComparativePair> pairs, const EmbeddingMatrix& emb,
                                   const TrainConfig& config, std::optional<ScoringHead> init) {
  require_loss(config, LossKind::hinge_svm_difference);
  if (config.early_stopping) throw ValidationError("the SVM baseline does not use a validation set");
  const auto rows = resolve(emb, pairs);
  ScoringHead head = initial_head(init, emb.dim());
  // A bias on difference features is meaningless; the classifier is w.d.
  head.b = 0.0;
  std::vector<PairRow> batch;
  return run_training(
      rows.size(), config, std::move(head), /*update_bias=*/false,
      [&](const ScoringHead& h, std::span<const std::size_t> idx, LossGradient& g) {
        batch.clear();
        for (auto i : idx) batch.push_back(rows[i]);
        hinge_pairs(h, batch, g);
        add_l2(h, config.l2_penalty, g);
      },
      [](const ScoringHead&) { return 0.0; });
}

std::vector<double> predict_scores(const TrainedModel& model, const EmbeddingMatrix& emb,
                                   std::span<const std::string> ids) {
  require_dim(model.head, emb.dim());
  std::vector<double> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(score(model.head, emb.row(id)));
  return out;
}

namespace {

nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["loss"] = to_string(c.loss);
  j["max_epochs"] = c.max_epochs;
  j["lr_start"] = c.lr_start;
  j["lr_end"] = c.lr_end;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = to_string(c.optimizer);
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["l2_penalty"] = c.l2_penalty;
  if (c.early_stopping) {
    j["early_stopping"] = {{"patience", c.early_stopping->patience}};
  } else {
    j["early_stopping"] = nullptr;
  }
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) { return config_to_json(config).dump(); }

TrainConfig apply_train_config_overrides(TrainConfig config, std::string_view json) {
  if (json.empty()) return config;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("train config: ") + e.what(), 1);
  }
  if (j.is_null()) return config;
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "loss") config.loss = parse_loss_kind(value.get<std::string>());
      else if (key == "max_epochs") config.max_epochs = value.get<std::size_t>();
      else if (key == "lr_start") config.lr_start = value.get<double>();
      else if (key == "lr_end") config.lr_end = value.get<double>();
      else if (key == "batch_size") config.batch_size = value.get<std::size_t>();
      else if (key == "optimizer") config.optimizer = parse_optimizer_kind(value.get<std::string>());
      else if (key == "adam_beta1") config.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") config.adam_beta2 = value.get<double>();
      else if (key == "adam_epsilon") config.adam_epsilon = value.get<double>();
      else if (key == "l2_penalty") config.l2_penalty = value.get<double>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "early_stopping") {
        if (value.is_null() || (value.is_boolean() && !value.get<bool>())) config.early_stopping.reset();
        else if (value.is_boolean()) config.early_stopping = EarlyStopping{};
        else config.early_stopping = EarlyStopping{value.value("patience", std::size_t{20})};
      } else {
        throw ValidationError("unknown train config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  config.validate();
  return config;
}

std::string TrainedModel::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = head.dim();
  j["w"] = head.w;
  j["b"] = head.b;
  j["config"] = config_to_json(config);
  j["best_epoch"] = best_epoch;
  j["history"] = {{"train_loss", train_loss}, {"validation_loss", validation_loss}};
  return j.dump();
}

TrainedModel TrainedModel::from_json(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    TrainedModel m;
    m.head = ScoringHead(j.at("w").get<std::vector<double>>(), j.at("b").get<double>());
    if (m.head.dim() != j.at("dim").get<std::size_t>()) throw ValidationError("model dim does not match w");
    m.config = apply_train_config_overrides(TrainConfig{}, j.at("config").dump());
    m.best_epoch = j.at("best_epoch").get<long>();
    m.train_loss = j.at("history").at("train_loss").get<std::vector<double>>();
    m.validation_loss = j.at("history").at("validation_loss").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what(), 1);
  }
}

}  // namespace spe
