// Acceptance checks, one PASS/FAIL line per criterion.
// Usage: acceptance [tables|steering|probe|toy|numerics|formats]...   (no argument = all)

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <json.hpp>

#include "rsteer/dump.hpp"
#include "rsteer/embed.hpp"
#include "rsteer/probe.hpp"
#include "rsteer/rng.hpp"
#include "rsteer/score_table.hpp"
#include "rsteer/stats.hpp"
#include "rsteer/steering.hpp"
#include "rsteer/toy_experiment.hpp"

using namespace rsteer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Collects sub-check outcomes for one criterion.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    fmt::print("  [{}] {}\n", ok ? "ok" : "FAILED", what);
  }
  void note(const std::string& what) { fmt::print("  {}\n", what); }
  bool ok() const { return ok_; }

 private:
  bool ok_ = true;
};

fs::path fixture(const std::string& name) { return fs::path(RSTEER_FIXTURE_DIR) / name; }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

ScoreTable table_from(const json& row) {
  std::vector<TypedScore> scores;
  for (std::size_t k = 0; k < 5; ++k) scores.emplace_back(kAllQueryTypes[k], row["cells"][k].get<double>());
  return aggregate(scores, row["model"].get<std::string>());
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- tables
void tables(Report& r) {
  const json t = read_json(fixture("published_scores.json"));
  auto exact = [&](const json& rows) {
    int hits = 0;
    for (const auto& row : rows) {
      const std::string got = format2(table_from(row).overall());
      const bool ok = got == row["average"].get<std::string>();
      hits += ok;
      r.note(fmt::format("{:<28} {} printed {}{}", row["model"].get<std::string>(), got,
                         row["average"].get<std::string>(), ok ? "" : "  MISMATCH"));
    }
    return hits;
  };
  const int t2 = exact(t["prompting"]);
  r.check(t2 >= 3, fmt::format("prompting rows reproduced exactly: {}/{} (need >= 3)", t2, t["prompting"].size()));
  const int t4 = exact(t["editing_before"]) + exact(t["editing_after"]);
  r.check(t4 >= 2, fmt::format("editing comparison rows reproduced exactly: {}/{} (need >= 2)", t4,
                               t["editing_before"].size() + t["editing_after"].size()));
  auto avg = [](std::array<double, 5> c) {
    std::vector<TypedScore> s;
    for (std::size_t k = 0; k < 5; ++k) s.emplace_back(kAllQueryTypes[k], c[k]);
    return format2(aggregate(s).overall());
  };
  r.check(avg({1.87, 1.97, 1.61, 1.08, 0.88}) == "1.48", "(1.87,1.97,1.61,1.08,0.88) -> 1.48");
  r.check(avg({1.87, 1.96, 1.70, 1.18, 1.01}) == "1.54", "(1.87,1.96,1.70,1.18,1.01) -> 1.54");
}

// ---------------------------------------------------------------- steering
void steering(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  const Eigen::Index d = 64;
  RejectionDirection dir;
  dir.vector = random_vector(rng, d);
  dir.mask.assign(static_cast<std::size_t>(d), false);

  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < 1000; ++i) states.push_back(random_vector(rng, d) + (i % 3 == 0 ? dir.vector : Eigen::VectorXd::Zero(d)));

  bool dichotomy = true;
  for (double tau : {-0.5, 0.0, 0.1, 0.5}) {
    const SteeringConfig cfg{0, tau, 1.5, true};
    for (const auto& s : states) {
      const Eigen::VectorXd out = gate_and_steer(s, dir, cfg);
      const bool same = std::memcmp(out.data(), s.data(), sizeof(double) * static_cast<std::size_t>(d)) == 0;
      const Eigen::VectorXd moved = s + cfg.scale * dir.vector;
      const bool steered = std::memcmp(out.data(), moved.data(), sizeof(double) * static_cast<std::size_t>(d)) == 0;
      dichotomy = dichotomy && (same || steered) && steered == (cosine_similarity(s, dir.vector) > tau);
    }
  }
  r.check(dichotomy, "gate dichotomy: output is the input bit for bit or exactly input + alpha*d (4000 cases)");

  bool monotone = true;
  std::vector<double> taus;
  for (int k = 0; k <= 40; ++k) taus.push_back(-1.0 + 0.05 * k);
  std::size_t prev = states.size() + 1;
  for (double tau : taus) {
    std::size_t fired = 0;
    for (const auto& s : states) fired += gate_fires(s, dir, SteeringConfig{0, tau, 1.0, true});
    monotone = monotone && fired <= prev;
    prev = fired;
  }
  r.check(monotone, "tau-monotonicity: firing set shrinks as tau grows (1000 states, 41 thresholds)");

  bool scale_ok = true;
  RejectionDirection scaled = dir;
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    scaled.vector = dir.vector * c;
    for (std::size_t i = 0; i < 200; ++i) {
      scale_ok = scale_ok && std::abs(cosine_similarity(states[i], scaled.vector) - cosine_similarity(states[i], dir.vector)) < 1e-12;
      scale_ok = scale_ok && gate_fires(states[i], scaled, SteeringConfig{0, 0.1, 1.0, true}) ==
                                 gate_fires(states[i], dir, SteeringConfig{0, 0.1, 1.0, true});
    }
  }
  r.check(scale_ok, "direction-scale invariance of cosine and gate decision");

  std::vector<Eigen::VectorXd> c, n;
  for (int i = 0; i < 50; ++i) {
    c.push_back(random_vector(rng, d, 2.0));
    n.push_back(random_vector(rng, d, 1.0));
  }
  const Eigen::VectorXd closed = mean_vector(std::span<const Eigen::VectorXd>(c)) - mean_vector(std::span<const Eigen::VectorXd>(n));
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto diffs = pair_and_diff(std::span<const Eigen::VectorXd>(c), std::span<const Eigen::VectorXd>(n), seed);
    worst = std::max(worst, (mean_vector(std::span<const Eigen::VectorXd>(diffs)) - closed).cwiseAbs().maxCoeff());
  }
  r.check(worst < 1e-9, fmt::format("pairing-seed invariance of the center: max deviation {:.2e} (< 1e-9)", worst));

  // Measured, not asserted: the variance mask depends on the pairing.
  const auto ref = compute_rejection_direction(std::span<const Eigen::VectorXd>(c), std::span<const Eigen::VectorXd>(n), 0.5, 1);
  double agreement = 0.0;
  for (std::uint64_t seed = 2; seed <= 10; ++seed) {
    const auto other = compute_rejection_direction(std::span<const Eigen::VectorXd>(c), std::span<const Eigen::VectorXd>(n), 0.5, seed);
    std::size_t same = 0;
    for (std::size_t k = 0; k < ref.mask.size(); ++k) same += ref.mask[k] == other.mask[k];
    agreement += static_cast<double>(same) / static_cast<double>(ref.mask.size()) / 9.0;
  }
  r.note(fmt::format("mask agreement across pairing seeds 2..10 vs seed 1 (d={}, q=0.5): {:.3f}", d, agreement));

  bool masks = true;
  for (Eigen::Index dd : {8, 256, 4096}) {
    Eigen::VectorXd var(dd);
    for (auto& x : var) x = rng.uniform() + 0.01;
    for (double q : {0.0, 0.25, 0.5, 0.9}) {
      const auto mask = high_variance_mask(var, q);
      const long zeroed = std::count(mask.begin(), mask.end(), true);
      const long expected = static_cast<long>(dd) - 1 - static_cast<long>(std::floor((1.0 - q) * static_cast<double>(dd - 1)));
      if (zeroed != expected) {
        masks = false;
        r.note(fmt::format("d={} q={} zeroed {} expected {}", dd, q, zeroed, expected));
      }
    }
  }
  r.check(masks, "mask cardinality exact for q in {0,0.25,0.5,0.9}, d in {8,256,4096}");
  const double secs = seconds_since(t0);
  r.check(secs < 10.0, fmt::format("runtime {:.2f} s (< 10 s)", secs));
}

// ---------------------------------------------------------------- probe
struct Labeled {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Labeled two_gaussians(int per_class, int d, double sep, std::uint64_t seed) {
  Rng rng(seed);
  Labeled out{Eigen::MatrixXd(2 * per_class, d), {}};
  for (int i = 0; i < 2 * per_class; ++i) {
    for (int k = 0; k < d; ++k) out.x(i, k) = rng.normal();
    out.x(i, 0) += i % 2 ? sep : -sep;
    out.y.push_back(i % 2);
  }
  return out;
}

double probe_accuracy(const Probe& p, const Labeled& data) {
  const auto pred = p.predict(data.x);
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.y[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

void probe(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  ProbeConfig cfg;
  cfg.input_dim = 16;
  cfg.seed = 1;
  cfg.learning_rate = 1e-3;
  const Labeled train = two_gaussians(200, 16, 3.0, 1);
  const double sep = probe_accuracy(train_probe(train.x, train.y, cfg), two_gaussians(100, 16, 3.0, 2));
  r.check(sep >= 0.95, fmt::format("separable Gaussians: held-out accuracy {:.3f} (>= 0.95)", sep));

  // Labels of both splits permuted.
  Labeled shuffled = train;
  Labeled shuffled_test = two_gaussians(500, 16, 3.0, 2);
  Rng rng(5);
  rng.shuffle(std::span<int>(shuffled.y));
  rng.shuffle(std::span<int>(shuffled_test.y));
  const double chance = probe_accuracy(train_probe(shuffled.x, shuffled.y, cfg), shuffled_test);
  r.check(chance >= 0.40 && chance <= 0.60, fmt::format("shuffled labels: accuracy {:.3f} (in [0.40, 0.60])", chance));

  ProbeResult pr;
  pr.accuracy = {{QueryType::RoleSetting, 0.9}, {QueryType::RoleProfile, 0.7}, {QueryType::FactualKnowledge, 0.3},
                 {QueryType::AbsentKnowledge, 0.6}};
  compute_composites(pr);
  r.check(*pr.contextual == (0.9 + 0.7) / 2 && *pr.parametric == (0.3 + 0.6) / 2, "composites equal arithmetic means exactly");

  ActivationSet set;
  set.model_id = "synthetic";
  set.hidden_dim = 16;
  for (int q = 0; q < 300; ++q) {
    const auto label = static_cast<QueryType>(q % 5);
    Eigen::VectorXf v(16);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    if (is_conflict(label)) v[0] += 2.0f;
    set.records.push_back({fmt::format("q{:03}", q), label, 0, kLastToken, v});
  }
  set.refresh_layers();
  ProbeConfig sc;
  sc.hidden_dim = 64;
  sc.epochs = 5;
  sc.learning_rate = 1e-3;
  SweepOptions so;
  so.train_per_category = 40;
  so.test_per_category = 20;
  const SweepResult a = layerwise_sweep(set, sc, so);
  so.threads = 3;
  const SweepResult b = layerwise_sweep(set, sc, so);
  bool same = a.results.size() == 6 && b.results.size() == 6;
  for (std::size_t i = 0; same && i < a.results.size(); ++i) same = a.results[i].accuracy == b.results[i].accuracy;
  r.check(same && sweep_csv(a.summary) == sweep_csv(b.summary), "6-seed sweep deterministic per seed (1 vs 3 threads)");
  const double secs = seconds_since(t0);
  r.check(secs < 60.0, fmt::format("runtime {:.1f} s (< 60 s)", secs));
}

// ---------------------------------------------------------------- toy
double subset_silhouette(const Eigen::MatrixXd& pts, const std::vector<QueryType>& labels, QueryType cls) {
  std::vector<Eigen::Index> idx;
  std::vector<int> lab;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cls || labels[i] == QueryType::NonConflict) {
      idx.push_back(static_cast<Eigen::Index>(i));
      lab.push_back(labels[i] == cls);
    }
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), 2);
  for (std::size_t k = 0; k < idx.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = pts.row(idx[k]);
  return silhouette(sub, lab);
}

void toy(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const RoleFactWorld world = build_world(WorldParams{});
  const ToyConfig cfg;
  const TrainResult trained = train_toy(cfg, world, TrainOptions{});
  const ToyModel& model = trained.model;
  const int last = cfg.n_layers - 1;
  r.note(fmt::format("trained {} steps, final loss {:.4f}, {:.1f} s", TrainOptions{}.steps, trained.final_loss, seconds_since(t0)));

  const std::vector<int> layers = {last};
  const ActivationSet all = collect_activations(model, world, layers, PromptSplit::All, "toy");

  SweepOptions so;
  so.layers = layers;
  const SweepResult sweep = layerwise_sweep(all, ProbeConfig{}, so);
  std::map<std::string, double> probe_acc;
  for (const auto& s : sweep.summary) probe_acc[s.category] = s.mean_accuracy;
  r.check(probe_acc.at("contextual") >= probe_acc.at("parametric"),
          fmt::format("(a) last-layer probe: contextual {:.3f} >= parametric {:.3f} (non_conflict {:.3f})",
                      probe_acc.at("contextual"), probe_acc.at("parametric"), probe_acc.at("non_conflict")));

  const auto recs = all.at_layer(static_cast<std::uint16_t>(last));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(recs.size()), all.hidden_dim);
  std::vector<QueryType> labels;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = recs[i]->vector.cast<double>().transpose();
    labels.push_back(recs[i]->label);
  }
  const Eigen::MatrixXd emb = tsne2(x, EmbeddingConfig{});
  const double s_ctx = subset_silhouette(emb, labels, QueryType::RoleSetting);
  const double s_par = subset_silhouette(emb, labels, QueryType::FactualKnowledge);
  r.check(s_ctx > s_par, fmt::format("(b) t-SNE silhouette: contextual {:.3f} > parametric {:.3f}", s_ctx, s_par));

  auto is_rs = [](QueryType q) { return q == QueryType::RoleSetting; };
  auto is_nc = [](QueryType q) { return q == QueryType::NonConflict; };
  const ActivationSet train = collect_activations(model, world, layers, PromptSplit::Train, "toy");
  const ActivationSet held = collect_activations(model, world, layers, PromptSplit::HeldOut, "toy");
  const auto layer = static_cast<std::uint16_t>(last);
  RejectionDirection dir = compute_rejection_direction<float>(train.vectors(layer, is_rs), train.vectors(layer, is_nc), 0.5, 0);
  dir.layer = last;
  const Calibration cal = calibrate_threshold<float>(dir, held.vectors(layer, is_rs), held.vectors(layer, is_nc));
  const SteeringPlan plan{{last, cal.threshold, 4.0, true}, dir};
  const BehaviorReport base = evaluate_behavior(model, world, PromptSplit::All, nullptr);
  const BehaviorReport steered = evaluate_behavior(model, world, PromptSplit::All, &plan);
  const auto& fk0 = base.categories.at(QueryType::FactualKnowledge);
  const auto& fk1 = steered.categories.at(QueryType::FactualKnowledge);
  const auto& nc0 = base.categories.at(QueryType::NonConflict);
  const auto& nc1 = steered.categories.at(QueryType::NonConflict);
  r.note(fmt::format("direction layer {} |d|={:.3f}; tau {:.3f} (class means {:.3f}/{:.3f}, holdout accuracy {:.3f}); alpha 4",
                     last, dir.vector.norm(), cal.threshold, cal.mean_conflict, cal.mean_nonconflict, cal.accuracy));
  r.check(fk1.refuse_rate() > fk0.refuse_rate() && nc0.accuracy() - nc1.accuracy() <= 0.05,
          fmt::format("(c) in-series REFUSE rate {}/{} -> {}/{} (must rise); NonConflict accuracy {:.3f} -> {:.3f} (drop <= 0.05)",
                      fk0.refused, fk0.n, fk1.refused, fk1.n, nc0.accuracy(), nc1.accuracy()));
  const double secs = seconds_since(t0);
  r.check(secs < 300.0, fmt::format("runtime {:.1f} s (< 300 s)", secs));
}

// ---------------------------------------------------------------- numerics
void numerics(Report& r) {
  const RoleFactWorld world = build_world(WorldParams{});
  ToyConfig cfg;
  const ToyModel model = ToyModel::initialize(cfg);
  std::vector<Example> batch = training_examples(world, false);
  batch.resize(4);
  const auto [l0, grad] = loss_and_gradient(model, batch);
  ToyModel probe = model;
  auto params = probe.params.tensors();
  const auto grads = std::as_const(grad).tensors();
  Rng rng(11);
  const double h = 1e-3;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      if (rng.uniform() >= 0.01) continue;
      const double saved = params[t][i];
      params[t][i] = saved + h;
      const double up = loss(probe, batch);
      params[t][i] = saved - h;
      const double down = loss(probe, batch);
      params[t][i] = saved;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[t][i]) / std::max({std::abs(fd), std::abs(grads[t][i]), 1e-6}));
      ++checked;
    }
  }
  r.check(worst < 1e-3, fmt::format("gradient vs central differences: {} of {} parameters, worst relative error {:.2e} (< 1e-3)",
                                    checked, model.params.parameter_count(), worst));

  double row_err = 0.0;
  for (const auto& p : world.prompts) {
    const ForwardResult f = forward_with_hooks(model, world.prompt_tokens(p), {});
    for (const auto& heads : f.attention) {
      for (const auto& a : heads) row_err = std::max(row_err, (a.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
  }
  r.check(row_err < 1e-6, fmt::format("attention rows sum to 1: max error {:.2e} over {} prompts (< 1e-6)", row_err, world.prompts.size()));

  Eigen::MatrixXd data(300, 20);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index k = 0; k < data.cols(); ++k) data(i, k) = rng.normal(0.0, 1.0 + 0.4 * static_cast<double>(k));
  }
  const PcaResult pca = pca2(data);
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd top = eig.eigenvectors().rightCols(2).rowwise().reverse();
  double pca_err = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double dot = std::abs(pca.components.col(k).dot(top.col(k)));
    pca_err = std::max(pca_err, std::abs(dot - 1.0));
    const double frac = eig.eigenvalues()[eig.eigenvalues().size() - 1 - k] / eig.eigenvalues().sum();
    pca_err = std::max(pca_err, std::abs(frac - pca.explained[k]));
  }
  const Eigen::MatrixXd proj = centered * top;
  pca_err = std::max(pca_err, ((pca.points * pca.points.transpose()) - (proj * proj.transpose())).cwiseAbs().maxCoeff());
  r.check(pca_err < 1e-6, fmt::format("PCA vs dense eigensolver: max deviation {:.2e} (< 1e-6)", pca_err));

  Eigen::MatrixXd small = data.topRows(120);
  EmbeddingConfig ec;
  ec.seed = 5;
  const Eigen::MatrixXd a = tsne2(small, ec);
  const Eigen::MatrixXd b = tsne2(small, ec);
  r.check(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0,
          "t-SNE byte-exact under a fixed seed");
}

// ---------------------------------------------------------------- formats
void formats(Report& r) {
  const fs::path dir = fs::temp_directory_path() / fmt::format("rsteer_acceptance_{}", std::random_device{}());
  fs::create_directories(dir);
  Rng rng(77);
  ActivationSet set;
  set.model_id = "round-trip";
  set.hidden_dim = 24;
  std::uint64_t expected_size = dump_header_size(set.model_id);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXf v(24);
    for (auto& x : v) x = static_cast<float>(rng.normal(0.0, 3.0));
    if (i % 97 == 0) v[3] = -0.0f;
    if (i % 101 == 0) v[5] = std::numeric_limits<float>::denorm_min();
    ActivationRecord rec{fmt::format("q{}", i / 4), static_cast<QueryType>(i % 5), static_cast<std::uint16_t>(i % 4),
                         i % 7 == 0 ? 3 : kLastToken, v};
    expected_size += dump_record_size(rec.query_id, set.hidden_dim);
    set.records.push_back(std::move(rec));
  }
  set.refresh_layers();
  const auto written = write_dump(set, dir / "a.rsd");
  const ActivationSet back = read_dump(dir / "a.rsd");
  write_dump(back, dir / "b.rsd");
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  r.check(back == set && written == expected_size && fs::file_size(dir / "a.rsd") == expected_size &&
              bytes(dir / "a.rsd") == bytes(dir / "b.rsd"),
          fmt::format("10,000-record dump round trip bit-exact ({} bytes)", written));
  fs::remove_all(dir);

  const json expected = read_json(fixture("malformed/expected_errors.json"));
  std::set<std::string> codes;
  bool all = true;
  for (auto it = expected.begin(); it != expected.end(); ++it) {
    std::string got = "no error";
    try {
      read_dump(fixture("malformed/" + it.key()));
    } catch (const Error& e) {
      got = std::string(to_string(e.code()));
    }
    const bool ok = got == it->get<std::string>();
    all = all && ok;
    codes.insert(got);
    r.note(fmt::format("{:<20} -> {}{}", it.key(), got, ok ? "" : fmt::format("  (expected {})", it->get<std::string>())));
  }
  r.check(all && codes.size() == expected.size(), "malformed fixtures raise their designated, distinct errors");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria = {
      {"tables", tables}, {"steering", steering}, {"probe", probe},
      {"toy", toy},       {"numerics", numerics}, {"formats", formats}};
  const std::map<std::string, std::string> titles = {
      {"tables", "Table arithmetic reproduction"},
      {"steering", "Steering algebra suite"},
      {"probe", "Probe oracle suite"},
      {"toy", "End-to-end toy replication"},
      {"numerics", "Numerical checks"},
      {"formats", "Format conformance"}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (!titles.contains(w)) {
      fmt::print(stderr, "unknown criterion {}\n", w);
      return 2;
    }
  }
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && !wanted.contains(name)) continue;
    Report report;
    try {
      fn(report);
    } catch (const std::exception& e) {
      report.check(false, fmt::format("exception: {}", e.what()));
    }
    fmt::print("{} {}\n", report.ok() ? "PASS" : "FAIL", titles.at(name));
    std::fflush(stdout);
    failed += !report.ok();
  }
  return failed == 0 ? 0 : 1;
}
