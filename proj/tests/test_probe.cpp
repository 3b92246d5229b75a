#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "rsteer/probe.hpp"
#include "rsteer/rng.hpp"
#include "test_util.hpp"

using namespace rsteer;

namespace {

struct Data {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

// Centers +/- sep * e1, unit variance.
Data two_gaussians(int per_class, int d, double sep, std::uint64_t seed) {
  Rng rng(seed);
  Data out{Eigen::MatrixXd(2 * per_class, d), {}};
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    for (int k = 0; k < d; ++k) out.x(i, k) = rng.normal();
    out.x(i, 0) += label ? sep : -sep;
    out.y.push_back(label);
  }
  return out;
}

double accuracy(const Probe& p, const Data& d) {
  const auto pred = p.predict(d.x);
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == d.y[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ProbeConfig config_for(int d, std::uint64_t seed = 1) {
  ProbeConfig c;
  c.input_dim = d;
  c.seed = seed;
  c.learning_rate = 1e-3;
  return c;
}

ActivationSet toy_activations(std::uint16_t n_layers, int per_type, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  ActivationSet set;
  set.model_id = "synthetic";
  set.hidden_dim = dim;
  for (int q = 0; q < 5 * per_type; ++q) {
    const auto label = static_cast<QueryType>(q % 5);
    Eigen::VectorXf base(dim);
    for (auto& x : base) x = static_cast<float>(rng.normal());
    if (is_conflict(label)) base[0] += 2.0f;
    for (std::uint16_t l = 0; l < n_layers; ++l) {
      set.records.push_back({"q" + std::to_string(q), label, l, kLastToken, base});
    }
  }
  set.refresh_layers();
  return set;
}

}  // namespace

TEST(Probe, SeparableGaussians) {
  const Data train = two_gaussians(200, 16, 3.0, 1);
  const Data test = two_gaussians(100, 16, 3.0, 2);
  const Probe p = train_probe(train.x, train.y, config_for(16));
  EXPECT_GE(accuracy(p, test), 0.95);
}

TEST(Probe, ShuffledLabelsAreChance) {
  Data train = two_gaussians(200, 16, 3.0, 1);
  Data test = two_gaussians(500, 16, 3.0, 2);
  Rng rng(5);
  rng.shuffle(std::span<int>(train.y));
  rng.shuffle(std::span<int>(test.y));
  const Probe p = train_probe(train.x, train.y, config_for(16));
  const double acc = accuracy(p, test);
  EXPECT_GE(acc, 0.40);
  EXPECT_LE(acc, 0.60);
}

TEST(Probe, OneEpochBeatsChance) {
  const Data train = two_gaussians(200, 16, 3.0, 1);
  const Data test = two_gaussians(100, 16, 3.0, 2);
  ProbeConfig c = config_for(16);
  c.epochs = 1;
  EXPECT_GT(accuracy(train_probe(train.x, train.y, c), test), 0.5);
  c.epochs = 0;
  EXPECT_RSTEER_ERROR(train_probe(train.x, train.y, c), ErrorCode::InvalidArgument);
}

TEST(Probe, SingleClassRejected) {
  Data train = two_gaussians(10, 4, 3.0, 1);
  std::fill(train.y.begin(), train.y.end(), 1);
  EXPECT_RSTEER_ERROR(train_probe(train.x, train.y, config_for(4)), ErrorCode::SingleClass);
}

TEST(Probe, DeterministicPerSeed) {
  const Data train = two_gaussians(50, 8, 1.0, 1);
  const Probe a = train_probe(train.x, train.y, config_for(8, 3));
  const Probe b = train_probe(train.x, train.y, config_for(8, 3));
  const Probe c = train_probe(train.x, train.y, config_for(8, 4));
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w2, b.w2);
  EXPECT_NE(a.w1, c.w1);
}

TEST(Probe, LinearDecayEndsAtZero) {
  const Data train = two_gaussians(40, 4, 3.0, 1);
  ProbeConfig c = config_for(4);
  c.epochs = 3;
  const Probe p = train_probe(train.x, train.y, c);
  EXPECT_EQ(p.steps_taken, 3 * ((80 + 31) / 32));
  EXPECT_NEAR(p.final_learning_rate, linear_decay_lr(c.learning_rate, p.steps_taken, p.steps_taken), 1e-12);
  EXPECT_NEAR(p.final_learning_rate, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(linear_decay_lr(1.0, 1, 4), 0.75);
}

TEST(EvalProbe, ConstantClassifier) {
  Probe p;
  p.w1 = Eigen::MatrixXd::Zero(3, 2);
  p.b1 = Eigen::VectorXd::Zero(2);
  p.w2 = Eigen::MatrixXd::Zero(2, 2);
  p.b2 = Eigen::Vector2d(0.0, 1.0);
  std::map<QueryType, Eigen::MatrixXd> test;
  test[QueryType::NonConflict] = Eigen::MatrixXd::Random(50, 3);
  test[QueryType::RoleSetting] = Eigen::MatrixXd::Random(50, 3);
  test[QueryType::FactualKnowledge] = Eigen::MatrixXd::Random(50, 3);
  test[QueryType::AbsentKnowledge] = Eigen::MatrixXd(0, 3);
  const ProbeResult r = eval_probe(p, test);
  EXPECT_EQ(r.accuracy.at(QueryType::NonConflict), 0.0);
  EXPECT_EQ(r.accuracy.at(QueryType::RoleSetting), 1.0);
  EXPECT_EQ(r.accuracy.at(QueryType::FactualKnowledge), 1.0);
  EXPECT_FALSE(r.accuracy.contains(QueryType::AbsentKnowledge));
  EXPECT_EQ(r.contextual, 1.0);
  EXPECT_EQ(r.parametric, 1.0);
}

TEST(EvalProbe, CompositesAreMeans) {
  ProbeResult r;
  r.accuracy = {{QueryType::RoleSetting, 0.9}, {QueryType::RoleProfile, 0.7}, {QueryType::FactualKnowledge, 0.3},
                {QueryType::AbsentKnowledge, 0.6}};
  compute_composites(r);
  EXPECT_EQ(*r.contextual, (0.9 + 0.7) / 2);
  EXPECT_EQ(*r.parametric, (0.3 + 0.6) / 2);
  r.accuracy.erase(QueryType::RoleProfile);
  compute_composites(r);
  EXPECT_EQ(*r.contextual, 0.9);
  r.accuracy = {{QueryType::NonConflict, 1.0}};
  compute_composites(r);
  EXPECT_FALSE(r.contextual.has_value());
  EXPECT_FALSE(r.parametric.has_value());
}

TEST(EvalProbe, OrderInvariant) {
  const Data train = two_gaussians(50, 4, 1.0, 1);
  const Probe p = train_probe(train.x, train.y, config_for(4));
  Eigen::MatrixXd x = two_gaussians(30, 4, 1.0, 2).x;
  std::map<QueryType, Eigen::MatrixXd> a{{QueryType::RoleSetting, x}};
  std::map<QueryType, Eigen::MatrixXd> b{{QueryType::RoleSetting, x.colwise().reverse()}};
  EXPECT_EQ(eval_probe(p, a).accuracy, eval_probe(p, b).accuracy);
}

TEST(Sweep, CountsAndDeterminism) {
  const ActivationSet set = toy_activations(2, 40, 8, 3);
  ProbeConfig c;
  c.hidden_dim = 16;
  c.epochs = 3;
  c.learning_rate = 1e-3;
  SweepOptions o;
  o.train_per_category = 30;
  o.test_per_category = 10;
  const SweepResult a = layerwise_sweep(set, c, o);
  EXPECT_EQ(a.results.size(), 12u);
  const std::string csv = sweep_csv(a.summary);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,category,mean_accuracy,variance,n_seeds");
  for (const auto& s : a.summary) EXPECT_EQ(s.n_seeds, 6);
  // 7 categories (5 types + 2 composites) x 2 layers.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 7);

  o.threads = 3;
  const SweepResult b = layerwise_sweep(set, c, o);
  EXPECT_EQ(sweep_csv(b.summary), csv);
}

TEST(Sweep, IdenticalLayersAgree) {
  const ActivationSet set = toy_activations(2, 40, 8, 4);
  ProbeConfig c;
  c.hidden_dim = 16;
  c.epochs = 3;
  c.learning_rate = 1e-3;
  SweepOptions o;
  o.train_per_category = 30;
  o.test_per_category = 10;
  const SweepResult r = layerwise_sweep(set, c, o);
  std::map<std::string, std::vector<LayerSummary>> by_cat;
  for (const auto& s : r.summary) by_cat[s.category].push_back(s);
  for (const auto& [cat, rows] : by_cat) {
    ASSERT_EQ(rows.size(), 2u);
    const double sigma = std::sqrt(std::max(rows[0].variance, rows[1].variance));
    EXPECT_LE(std::abs(rows[0].mean_accuracy - rows[1].mean_accuracy), 3 * sigma + 1e-12) << cat;
  }
}
