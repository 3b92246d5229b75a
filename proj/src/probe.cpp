#include "rsteer/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"

namespace rsteer {

void ProbeConfig::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || batch_size <= 0) {
    throw Error("probe", ErrorCode::InvalidArgument, "probe dimensions and batch size must be positive");
  }
  if (epochs < 1) throw Error("probe", ErrorCode::InvalidArgument, "probe training needs at least one epoch");
  if (!(learning_rate > 0.0)) throw Error("probe", ErrorCode::InvalidArgument, "learning rate must be positive");
}

Eigen::MatrixXd Probe::logits(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd hidden = ((features * w1).rowwise() + b1.transpose()).cwiseMax(0.0);
  return (hidden * w2).rowwise() + b2.transpose();
}

std::vector<int> Probe::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd scores = logits(features);
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  // Ties resolve to class 0.
  for (Eigen::Index i = 0; i < scores.rows(); ++i) out[static_cast<std::size_t>(i)] = scores(i, 1) > scores(i, 0) ? 1 : 0;
  return out;
}

namespace {

struct Adam {
  explicit Adam(Eigen::Index rows, Eigen::Index cols) : m(Eigen::MatrixXd::Zero(rows, cols)), v(m) {}

  template <typename Param>
  void step(Param& param, const Eigen::MatrixXd& grad, double lr, long t) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
  }

  Eigen::MatrixXd m, v;
};

}  // namespace

Probe train_probe(const Eigen::MatrixXd& features, std::span<const int> labels, const ProbeConfig& config) {
  config.validate();
  if (features.cols() != config.input_dim) {
    throw Error("probe", ErrorCode::DimensionMismatch, "feature width differs from probe input_dim");
  }
  if (static_cast<std::size_t>(features.rows()) != labels.size() || labels.empty()) {
    throw Error("probe", ErrorCode::InvalidArgument, "need one label per feature row");
  }
  const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
  const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (!has0 || !has1) throw Error("probe", ErrorCode::SingleClass, "probe training data contains a single class");
  if (std::any_of(labels.begin(), labels.end(), [](int y) { return y != 0 && y != 1; })) {
    throw Error("probe", ErrorCode::InvalidArgument, "probe labels must be 0 or 1");
  }

  Rng rng(config.seed);
  Probe probe;
  auto uniform_init = [&](Eigen::Index rows, Eigen::Index cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    return m;
  };
  probe.w1 = uniform_init(config.input_dim, config.hidden_dim, config.input_dim);
  probe.b1 = uniform_init(config.hidden_dim, 1, config.input_dim);
  probe.w2 = uniform_init(config.hidden_dim, 2, config.hidden_dim);
  probe.b2 = uniform_init(2, 1, config.hidden_dim);

  Adam opt_w1(probe.w1.rows(), probe.w1.cols()), opt_b1(probe.b1.rows(), 1);
  Adam opt_w2(probe.w2.rows(), probe.w2.cols()), opt_b2(probe.b2.rows(), 1);

  const auto n = static_cast<long>(labels.size());
  const long batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = batches_per_epoch * config.epochs;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (long start = 0; start < n; start += config.batch_size) {
      const long count = std::min<long>(config.batch_size, n - start);
      Eigen::MatrixXd x(count, features.cols());
      Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(count, 2);
      for (long i = 0; i < count; ++i) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + i)];
        x.row(i) = features.row(row);
        onehot(i, labels[static_cast<std::size_t>(row)]) = 1.0;
      }

      const Eigen::MatrixXd pre = (x * probe.w1).rowwise() + probe.b1.transpose();
      const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
      const Eigen::MatrixXd scores = (hidden * probe.w2).rowwise() + probe.b2.transpose();
      Eigen::MatrixXd probs = (scores.colwise() - scores.rowwise().maxCoeff()).array().exp().matrix();
      probs = probs.array().colwise() / probs.rowwise().sum().array();

      const Eigen::MatrixXd dscores = (probs - onehot) / static_cast<double>(count);
      const Eigen::MatrixXd gw2 = hidden.transpose() * dscores;
      const Eigen::MatrixXd gb2 = dscores.colwise().sum().transpose();
      const Eigen::MatrixXd dhidden = (dscores * probe.w2.transpose()).array() * (pre.array() > 0.0).cast<double>();
      const Eigen::MatrixXd gw1 = x.transpose() * dhidden;
      const Eigen::MatrixXd gb1 = dhidden.colwise().sum().transpose();

      const double lr = linear_decay_lr(config.learning_rate, step, total_steps);
      ++step;
      opt_w1.step(probe.w1, gw1, lr, step);
      opt_b1.step(probe.b1, gb1, lr, step);
      opt_w2.step(probe.w2, gw2, lr, step);
      opt_b2.step(probe.b2, gb2, lr, step);
    }
  }
  probe.steps_taken = step;
  probe.final_learning_rate = linear_decay_lr(config.learning_rate, step, total_steps);
  return probe;
}

void compute_composites(ProbeResult& result) {
  auto composite = [&](ConflictClass cc) -> std::optional<double> {
    double sum = 0.0;
    int n = 0;
    for (const auto& [qt, acc] : result.accuracy) {
      if (conflict_class(qt) == cc) {
        sum += acc;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  result.contextual = composite(ConflictClass::Contextual);
  result.parametric = composite(ConflictClass::Parametric);
}

ProbeResult eval_probe(const Probe& probe, const std::map<QueryType, Eigen::MatrixXd>& test) {
  ProbeResult result;
  for (const auto& [qt, features] : test) {
    if (features.rows() == 0) continue;
    if (features.cols() != probe.w1.rows()) {
      throw Error("probe", ErrorCode::DimensionMismatch, "test feature width differs from probe input");
    }
    const int expected = is_conflict(qt) ? 1 : 0;
    const auto pred = probe.predict(features);
    const auto hits = std::count(pred.begin(), pred.end(), expected);
    result.accuracy[qt] = static_cast<double>(hits) / static_cast<double>(pred.size());
  }
  compute_composites(result);
  return result;
}

namespace {

struct Split {
  std::map<QueryType, std::vector<const ActivationRecord*>> train, test;
};

Split split_layer(const ActivationSet& set, int layer, std::uint64_t seed, const SweepOptions& options) {
  std::map<QueryType, std::vector<const ActivationRecord*>> by_type;
  for (const ActivationRecord* r : set.at_layer(static_cast<std::uint16_t>(layer))) by_type[r->label].push_back(r);

  Split split;
  for (auto& [qt, recs] : by_type) {
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->query_id < b->query_id; });
    Rng rng(seed ^ (0x51ed27ull * (static_cast<std::uint64_t>(qt) + 1)));
    rng.shuffle(std::span<const ActivationRecord*>(recs));

    const bool trains =
        std::find(options.train_categories.begin(), options.train_categories.end(), qt) != options.train_categories.end();
    const auto n = recs.size();
    std::size_t n_test = 0, n_train = 0;
    if (!trains) {
      n_test = std::min<std::size_t>(n, static_cast<std::size_t>(options.test_per_category));
    } else if (n >= static_cast<std::size_t>(options.train_per_category + options.test_per_category)) {
      n_test = static_cast<std::size_t>(options.test_per_category);
      n_train = static_cast<std::size_t>(options.train_per_category);
    } else {
      // Small pools keep the configured train:test proportion.
      const double share = static_cast<double>(options.test_per_category) /
                           static_cast<double>(options.train_per_category + options.test_per_category);
      n_test = static_cast<std::size_t>(std::lround(share * static_cast<double>(n)));
      n_train = n - n_test;
    }
    split.test[qt].assign(recs.begin(), recs.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train[qt].assign(recs.begin() + static_cast<std::ptrdiff_t>(n_test),
                           recs.begin() + static_cast<std::ptrdiff_t>(n_test + n_train));
  }
  return split;
}

Eigen::MatrixXd stack(std::span<const ActivationRecord* const> recs, std::uint32_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(recs.size()), dim);
  for (std::size_t i = 0; i < recs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = recs[i]->vector.cast<double>().transpose();
  return m;
}

ProbeResult run_one(const ActivationSet& set, int layer, std::uint64_t seed, const ProbeConfig& base,
                    const SweepOptions& options) {
  const Split split = split_layer(set, layer, seed, options);
  std::vector<const ActivationRecord*> train;
  std::vector<int> labels;
  for (const auto& [qt, recs] : split.train) {
    for (const auto* r : recs) {
      train.push_back(r);
      labels.push_back(is_conflict(qt) ? 1 : 0);
    }
  }
  ProbeConfig config = base;
  config.input_dim = static_cast<int>(set.hidden_dim);
  config.seed = seed;
  const Probe probe = train_probe(stack(train, set.hidden_dim), labels, config);

  std::map<QueryType, Eigen::MatrixXd> test;
  for (const auto& [qt, recs] : split.test) test[qt] = stack(recs, set.hidden_dim);
  ProbeResult result = eval_probe(probe, test);
  result.layer = layer;
  result.seed = seed;
  return result;
}

}  // namespace

SweepResult layerwise_sweep(const ActivationSet& activations, const ProbeConfig& config, const SweepOptions& options) {
  std::vector<int> layers = options.layers;
  if (layers.empty()) layers.assign(activations.layers_present.begin(), activations.layers_present.end());
  for (int l : layers) {
    if (!std::binary_search(activations.layers_present.begin(), activations.layers_present.end(), l)) {
      throw Error("probe", ErrorCode::LayerOutOfRange, "layer " + std::to_string(l) + " not present in activations");
    }
  }
  if (options.seeds.empty()) throw Error("probe", ErrorCode::InvalidArgument, "at least one seed is required");

  SweepResult out;
  const std::size_t n_jobs = layers.size() * options.seeds.size();
  out.results.resize(n_jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < n_jobs; job = next++) {
      try {
        out.results[job] = run_one(activations, layers[job / options.seeds.size()],
                                   options.seeds[job % options.seeds.size()], config, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(options.threads, static_cast<int>(n_jobs)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (std::size_t li = 0; li < layers.size(); ++li) {
    std::map<std::string, std::vector<double>> per_category;
    std::vector<std::string> order;
    auto add = [&](const std::string& name, double value) {
      if (!per_category.contains(name)) order.push_back(name);
      per_category[name].push_back(value);
    };
    for (std::size_t si = 0; si < options.seeds.size(); ++si) {
      const ProbeResult& r = out.results[li * options.seeds.size() + si];
      for (QueryType qt : kAllQueryTypes) {
        if (auto it = r.accuracy.find(qt); it != r.accuracy.end()) add(std::string(to_string(qt)), it->second);
      }
      if (r.contextual) add("contextual", *r.contextual);
      if (r.parametric) add("parametric", *r.parametric);
    }
    for (const auto& name : order) {
      const auto& values = per_category[name];
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size());
      out.summary.push_back({layers[li], name, mean, var, static_cast<int>(values.size())});
    }
  }
  return out;
}

std::string sweep_csv(std::span<const LayerSummary> summary) {
  std::string csv = "layer,category,mean_accuracy,variance,n_seeds\n";
  for (const auto& s : summary) {
    csv += fmt::format("{},{},{:.6f},{:.6f},{}\n", s.layer, s.category, s.mean_accuracy, s.variance, s.n_seeds);
  }
  return csv;
}

}  // namespace rsteer
