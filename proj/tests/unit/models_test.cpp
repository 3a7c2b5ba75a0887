#include <gtest/gtest.h>

#include <cmath>

#include "spe/error.hpp"
#include "spe/models.hpp"
#include "spe/random.hpp"

using namespace spe;

namespace {

EmbeddingMatrix random_embeddings(std::size_t n, std::size_t dim, Rng& rng) {
  EmbeddingMatrix emb(dim);
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : v) x = rng.normal();
    emb.add("e" + std::to_string(i), v);
  }
  return emb;
}

std::vector<double> brute_hinge_gradient(const ScoringHead& head, const EmbeddingMatrix& emb,
                                         const std::vector<ComparativePair>& batch, double h) {
  std::vector<double> g(head.dim());
  for (std::size_t j = 0; j < head.dim(); ++j) {
    ScoringHead plus = head, minus = head;
    plus.w[j] += h;
    minus.w[j] -= h;
    g[j] = (mean_hinge_loss(plus, emb, batch) - mean_hinge_loss(minus, emb, batch)) / (2 * h);
  }
  return g;
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-12 ? 0.0 : std::abs(a - b) / scale;
}

EmbeddingMatrix one_dim(const std::vector<std::pair<std::string, double>>& rows) {
  EmbeddingMatrix emb(1);
  for (const auto& [id, x] : rows) {
    const double v[] = {x};
    emb.add(id, v);
  }
  return emb;
}

}  // namespace

TEST(Score, DotProductPlusBias) {
  const ScoringHead zero(3);
  const double x[] = {4, 5, 6};
  EXPECT_EQ(score(zero, x), 0.0);
  const ScoringHead head(std::vector<double>{1, 2}, 0.5);
  const double y[] = {3, -1};
  EXPECT_DOUBLE_EQ(score(head, y), 1.5);
  const double z[] = {6, -2};
  EXPECT_DOUBLE_EQ(score(head, z), 2 * (score(head, y) - 0.5) + 0.5);
  const double wrong[] = {1};
  EXPECT_THROW(score(head, wrong), ValidationError);
}

TEST(ComparativeForward, BiasCancelsAndAntisymmetric) {
  const ScoringHead head(std::vector<double>{1}, 7);
  const double a[] = {2}, b[] = {0.5};
  EXPECT_DOUBLE_EQ(comparative_forward(head, a, b), 1.5);
  EXPECT_EQ(comparative_forward(head, a, a), 0.0);
  const ScoringHead h2(std::vector<double>{0.3, -1.7, 2.2}, -4);
  const double p[] = {1.1, 0.2, -0.4}, q[] = {-0.9, 0.35, 1.3};
  EXPECT_EQ(comparative_forward(h2, p, q), -comparative_forward(h2, q, p));
}

TEST(HingeLoss, HandValues) {
  EXPECT_DOUBLE_EQ(hinge_loss(1, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(hinge_loss(1, 1.2), 0.0);
  EXPECT_DOUBLE_EQ(hinge_loss(-1, 0.3), 1.3);
  EXPECT_DOUBLE_EQ(hinge_loss(1, 1.0), 0.0);
}

TEST(LearningRate, SpansConfiguredRange) {
  TrainConfig c = TrainConfig::comparative_defaults(false);
  EXPECT_DOUBLE_EQ(learning_rate(c, 0), 1e-3);
  EXPECT_NEAR(learning_rate(c, c.max_epochs - 1), 1e-6, 1e-18);
  const double ratio = std::pow(1e-3, 1.0 / static_cast<double>(c.max_epochs - 1));
  for (std::size_t e = 1; e < c.max_epochs; ++e) {
    EXPECT_NEAR(learning_rate(c, e) / learning_rate(c, e - 1), ratio, 1e-12);
  }
  c.max_epochs = 1;
  EXPECT_DOUBLE_EQ(learning_rate(c, 0), 1e-3);
}

TEST(TrainConfig, DefaultsPerRegime) {
  const auto r = TrainConfig::regression_defaults();
  EXPECT_EQ(r.loss, LossKind::mae_regression);
  EXPECT_EQ(r.max_epochs, 600u);
  EXPECT_EQ(r.batch_size, 32u);
  EXPECT_EQ(r.lr_start, 1e-3);
  EXPECT_EQ(r.lr_end, 1e-6);
  EXPECT_EQ(r.optimizer, OptimizerKind::adam);
  const auto n = TrainConfig::comparative_defaults(false);
  EXPECT_EQ(n.max_epochs, 100u);
  EXPECT_FALSE(n.early_stopping);
  const auto v = TrainConfig::comparative_defaults(true);
  EXPECT_EQ(v.max_epochs, 300u);
  ASSERT_TRUE(v.early_stopping);
  EXPECT_EQ(v.early_stopping->patience, 20u);
  EXPECT_EQ(TrainConfig::svm_defaults().l2_penalty, 1e-4);
}

TEST(TrainConfig, OverridesAndValidation) {
  auto c = apply_train_config_overrides(TrainConfig::comparative_defaults(false),
                                        R"({"max_epochs": 5, "optimizer": "sgd", "early_stopping": {"patience": 3}})");
  EXPECT_EQ(c.max_epochs, 5u);
  EXPECT_EQ(c.optimizer, OptimizerKind::sgd);
  EXPECT_EQ(c.early_stopping->patience, 3u);
  EXPECT_THROW(apply_train_config_overrides(c, R"({"bogus": 1})"), ValidationError);
  EXPECT_THROW(apply_train_config_overrides(c, R"({"lr_start": 1e-7})"), ValidationError);
  EXPECT_THROW(apply_train_config_overrides(c, R"({"batch_size": 0})"), ValidationError);
  EXPECT_THROW(apply_train_config_overrides(c, "{not json"), FormatError);
  EXPECT_EQ(apply_train_config_overrides(c, ""), c);
  EXPECT_EQ(apply_train_config_overrides(TrainConfig{}, train_config_to_json(c)), c);
}

TEST(Objectives, HingeGradientMatchesFiniteDifferences) {
  Rng rng(1);
  const auto emb = random_embeddings(20, 6, rng);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    ScoringHead head(6, rng.normal());
    for (auto& w : head.w) w = 0.5 * rng.normal();
    std::vector<ComparativePair> batch;
    for (int i = 0; i < 8; ++i) {
      const auto a = rng.below(20), b = (a + 1 + rng.below(19)) % 20;
      batch.push_back({"e" + std::to_string(a), "e" + std::to_string(b), rng.below(2) ? 1 : -1});
    }
    bool near_kink = false;
    for (const auto& p : batch) {
      near_kink |= std::abs(1 - p.y * comparative_forward(head, emb.row(p.a), emb.row(p.b))) < 1e-3;
    }
    if (near_kink) continue;
    const auto g = comparative_objective(head, emb, batch);
    EXPECT_EQ(g.grad_b, 0.0);
    const auto fd = brute_hinge_gradient(head, emb, batch, 1e-6);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_LE(relative_error(g.grad_w[j], fd[j]), 1e-4);
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(Objectives, AbsoluteErrorGradientMatchesFiniteDifferences) {
  Rng rng(2);
  const auto emb = random_embeddings(30, 5, rng);
  for (int trial = 0; trial < 30; ++trial) {
    ScoringHead head(5, rng.normal());
    for (auto& w : head.w) w = rng.normal();
    std::vector<LabeledExample> batch;
    for (int i = 0; i < 10; ++i) batch.push_back({"e" + std::to_string(rng.below(30)), 1 + 10 * rng.uniform()});
    const auto g = regression_objective(head, emb, batch);
    const double h = 1e-6;
    for (std::size_t j = 0; j <= 5; ++j) {
      ScoringHead plus = head, minus = head;
      double& p = j < 5 ? plus.w[j] : plus.b;
      double& m = j < 5 ? minus.w[j] : minus.b;
      p += h;
      m -= h;
      const double fd =
          (regression_objective(plus, emb, batch).loss - regression_objective(minus, emb, batch).loss) / (2 * h);
      EXPECT_LE(relative_error(j < 5 ? g.grad_w[j] : g.grad_b, fd), 1e-4);
    }
  }
}

TEST(Objectives, SvmZeroDifferenceHasConstantLoss) {
  const auto emb = one_dim({{"a", 2.0}, {"b", 2.0}});
  const std::vector<ComparativePair> batch{{"a", "b", 1}};
  const auto g = svm_objective(ScoringHead(std::vector<double>{3.0}, 0), emb, batch, 0.0);
  EXPECT_DOUBLE_EQ(g.loss, 1.0);
  EXPECT_EQ(g.grad_w[0], 0.0);
}

TEST(Objectives, ReversedPairHasSameLoss) {
  Rng rng(3);
  const auto emb = random_embeddings(4, 3, rng);
  const ScoringHead head(std::vector<double>{0.4, -0.2, 0.9}, 0);
  const std::vector<ComparativePair> fwd{{"e0", "e1", 1}};
  const std::vector<ComparativePair> rev{{"e1", "e0", -1}};
  EXPECT_DOUBLE_EQ(svm_objective(head, emb, fwd, 0.1).loss, svm_objective(head, emb, rev, 0.1).loss);
}

TEST(TrainComparative, ZeroEpochsReturnsInitialization) {
  const auto emb = one_dim({{"a", 1}, {"b", 2}});
  const std::vector<ComparativePair> pairs{{"b", "a", 1}};
  auto c = TrainConfig::comparative_defaults(false);
  c.max_epochs = 0;
  const ScoringHead init(std::vector<double>{0.25}, 3.0);
  const auto m = train_comparative(pairs, emb, {}, c, init);
  EXPECT_EQ(m.head, init);
  EXPECT_TRUE(m.train_loss.empty());
}

TEST(TrainComparative, BiasIsBitwiseUnchanged) {
  Rng rng(4);
  const auto emb = random_embeddings(40, 4, rng);
  std::vector<ComparativePair> pairs;
  for (int i = 0; i < 39; ++i) pairs.push_back({"e" + std::to_string(i), "e" + std::to_string(i + 1), i % 3 ? 1 : -1});
  for (auto opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
    auto c = TrainConfig::comparative_defaults(false);
    c.optimizer = opt;
    c.max_epochs = 30;
    const ScoringHead init(std::vector<double>{0.1, 0.2, 0.3, 0.4}, 0.123456789);
    EXPECT_EQ(train_comparative(pairs, emb, {}, c, init).head.b, 0.123456789);
  }
}

TEST(TrainComparative, SeparableOneDimensionalPairsReachLowLoss) {
  // s_i = x_i with gaps of at least 0.5, so w = 2 satisfies every margin.
  std::vector<std::pair<std::string, double>> rows;
  for (int i = 0; i < 20; ++i) rows.push_back({"x" + std::to_string(i), 0.5 * i});
  const auto emb = one_dim(rows);
  std::vector<ComparativePair> pairs;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      if (i != j) pairs.push_back({rows[i].first, rows[j].first, i > j ? 1 : -1});
    }
  }
  EXPECT_EQ(mean_hinge_loss(ScoringHead(std::vector<double>{2.0}, 0), emb, pairs), 0.0);
  auto c = TrainConfig::comparative_defaults(false);
  c.lr_start = 0.05;
  c.lr_end = 0.001;
  const auto m = train_comparative(pairs, emb, {}, c);
  EXPECT_LE(m.train_loss.size(), 100u);
  EXPECT_LT(mean_hinge_loss(m.head, emb, pairs), 0.01);
}

TEST(TrainComparative, EarlyStoppingNeedsValidationAndRestoresBest) {
  Rng rng(5);
  const auto emb = random_embeddings(30, 3, rng);
  std::vector<ComparativePair> pairs, val;
  for (int i = 0; i < 20; ++i) pairs.push_back({"e" + std::to_string(i), "e" + std::to_string(i + 1), 1});
  for (int i = 20; i < 29; ++i) val.push_back({"e" + std::to_string(i), "e" + std::to_string(i + 1), -1});
  auto c = TrainConfig::comparative_defaults(true);
  EXPECT_THROW(train_comparative(pairs, emb, {}, c), ValidationError);
  c.early_stopping->patience = 3;
  const auto m = train_comparative(pairs, emb, val, c);
  ASSERT_FALSE(m.validation_loss.empty());
  ASSERT_GE(m.best_epoch, 0);
  const auto best = std::min_element(m.validation_loss.begin(), m.validation_loss.end());
  EXPECT_EQ(best - m.validation_loss.begin(), m.best_epoch);
  EXPECT_DOUBLE_EQ(mean_hinge_loss(m.head, emb, val), *best);
  if (m.validation_loss.size() < c.max_epochs) {
    EXPECT_EQ(m.validation_loss.size(), static_cast<std::size_t>(m.best_epoch) + 1 + 3);
  }
}

TEST(TrainComparative, StopCallbackCancels) {
  Rng rng(6);
  const auto emb = random_embeddings(5, 2, rng);
  const std::vector<ComparativePair> pairs{{"e0", "e1", 1}};
  int calls = 0;
  EXPECT_THROW(train_comparative(pairs, emb, {}, TrainConfig::comparative_defaults(false), std::nullopt,
                                 [&] { return ++calls > 2; }),
               TrainingCancelled);
  EXPECT_EQ(calls, 3);
}

TEST(TrainComparative, DeterministicAndErrors) {
  Rng rng(7);
  const auto emb = random_embeddings(12, 3, rng);
  std::vector<ComparativePair> pairs;
  for (int i = 0; i < 11; ++i) pairs.push_back({"e" + std::to_string(i), "e" + std::to_string(11 - i), i < 6 ? 1 : -1});
  auto c = TrainConfig::comparative_defaults(false);
  c.seed = 9;
  const auto a = train_comparative(pairs, emb, {}, c);
  const auto b = train_comparative(pairs, emb, {}, c);
  EXPECT_EQ(a.head, b.head);
  EXPECT_EQ(a.train_loss, b.train_loss);
  const std::vector<ComparativePair> missing{{"e0", "nope", 1}};
  EXPECT_THROW(train_comparative(missing, emb, {}, c), NotFoundError);
  EXPECT_THROW(train_comparative(pairs, emb, {}, TrainConfig::regression_defaults()), ValidationError);
}

TEST(TrainRegression, ZeroFeatureItemMovesOnlyBias) {
  std::vector<BacklogItem> items(1);
  items[0].id = "z";
  items[0].story_point = StoryPoint(5);
  const auto emb = one_dim({{"z", 0.0}});
  auto c = TrainConfig::regression_defaults();
  c.lr_start = 0.1;
  c.lr_end = 0.001;
  const auto m = train_regression(items, emb, c);
  EXPECT_EQ(m.head.w[0], 0.0);
  EXPECT_LT(std::abs(m.head.b - 5.0), 0.1);
}

TEST(TrainRegression, ConstantTargetsApproachTheConstant) {
  Rng rng(8);
  const auto emb = random_embeddings(25, 3, rng);
  std::vector<BacklogItem> items;
  for (int i = 0; i < 25; ++i) {
    BacklogItem it;
    it.id = "e" + std::to_string(i);
    it.story_point = StoryPoint(3);
    items.push_back(it);
  }
  std::vector<LabeledExample> all;
  for (const auto& it : items) all.push_back({it.id, 3.0});
  EXPECT_EQ(regression_objective(ScoringHead(std::vector<double>{0, 0, 0}, 3.0), emb, all).loss, 0.0);
  auto c = TrainConfig::regression_defaults();
  c.lr_start = 0.05;
  c.lr_end = 1e-4;
  const auto m = train_regression(items, emb, c);
  EXPECT_LT(regression_objective(m.head, emb, all).loss, 0.1);
}

TEST(TrainRegression, EdgeCases) {
  std::vector<BacklogItem> items(1);
  items[0].id = "z";
  const auto emb = one_dim({{"z", 1.0}});
  EXPECT_THROW(train_regression(items, emb, TrainConfig::regression_defaults()), ValidationError);
  items[0].story_point = StoryPoint(2);
  auto c = TrainConfig::regression_defaults();
  c.max_epochs = 0;
  const ScoringHead init(std::vector<double>{0.5}, 0.25);
  EXPECT_EQ(train_regression(items, emb, c, init).head, init);
}

TEST(TrainSvm, SeparableTwoDimensionalPairs) {
  // Score w* = (1, -1) separates every pair below with margin >= 1 at scale 2.
  EmbeddingMatrix emb(2);
  Rng rng(9);
  std::vector<std::pair<std::string, double>> truth;
  for (int i = 0; i < 16; ++i) {
    const double x[] = {static_cast<double>(i), static_cast<double>((i * 7) % 16) * 0.1};
    emb.add("p" + std::to_string(i), x);
    truth.push_back({"p" + std::to_string(i), x[0] - x[1]});
  }
  std::vector<ComparativePair> pairs;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      if (i == j || std::abs(truth[i].second - truth[j].second) < 0.5) continue;
      pairs.push_back({truth[i].first, truth[j].first, truth[i].second > truth[j].second ? 1 : -1});
    }
  }
  EXPECT_EQ(svm_objective(ScoringHead(std::vector<double>{2.0, -2.0}, 0), emb, pairs, 0.0).loss, 0.0);
  auto c = TrainConfig::svm_defaults();
  c.l2_penalty = 0.0;
  c.max_epochs = 200;
  c.lr_start = 0.05;
  c.lr_end = 1e-3;
  const auto m = train_svm_comparative(pairs, emb, c, ScoringHead(std::vector<double>{0, 0}, 4.0));
  EXPECT_EQ(m.head.b, 0.0);
  EXPECT_LT(svm_objective(m.head, emb, pairs, 0.0).loss, 0.01);
}

TEST(PredictScores, OrderFollowsIds) {
  Rng rng(10);
  const auto emb = random_embeddings(4, 2, rng);
  TrainedModel m;
  m.head = ScoringHead(std::vector<double>{1.5, -0.5}, 0.25);
  EXPECT_TRUE(predict_scores(m, emb, {}).empty());
  const std::vector<std::string> ids{"e2", "e0", "e3"};
  const auto s = predict_scores(m, emb, ids);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], score(m.head, emb.row("e2")));
  const std::vector<std::string> rev{"e3", "e0", "e2"};
  const auto r = predict_scores(m, emb, rev);
  EXPECT_EQ(r[0], s[2]);
  EXPECT_EQ(r[2], s[0]);
  const std::vector<std::string> bad{"zz"};
  EXPECT_THROW(predict_scores(m, emb, bad), NotFoundError);
}

TEST(TrainedModel, JsonRoundTrip) {
  TrainedModel m;
  m.head = ScoringHead(std::vector<double>{0.1, 1.0 / 3.0, -2e-17}, 0.7);
  m.config = TrainConfig::comparative_defaults(true);
  m.train_loss = {0.9, 0.5};
  m.validation_loss = {1.0, 0.6};
  m.best_epoch = 1;
  const auto back = TrainedModel::from_json(m.to_json());
  EXPECT_EQ(back.head, m.head);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.train_loss, m.train_loss);
  EXPECT_EQ(back.validation_loss, m.validation_loss);
  EXPECT_EQ(back.best_epoch, 1);
}
