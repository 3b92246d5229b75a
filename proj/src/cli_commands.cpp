#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "cli_internal.hpp"
#include "rsteer/corpus.hpp"
#include "rsteer/dump.hpp"
#include "rsteer/embed.hpp"
#include "rsteer/error.hpp"
#include "rsteer/judge.hpp"
#include "rsteer/probe.hpp"
#include "rsteer/score_table.hpp"
#include "rsteer/steering.hpp"
#include "rsteer/toy_experiment.hpp"
#include "rsteer/toy_model.hpp"
#include "rsteer/world.hpp"

namespace rsteer::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Error usage(const std::string& msg) { return Error("cli", ErrorCode::Usage, msg); }

std::string fmt_double(double v) { return fmt::format("{:.6f}", v); }

/// "any" (or an empty list) selects every label.
std::set<QueryType> parse_labels(const std::vector<std::string>& names) {
  std::set<QueryType> out;
  for (const auto& n : names) {
    if (n == "any") return {};
    const auto qt = parse_query_type(n);
    if (!qt) throw usage("unknown query type '" + n + "'");
    out.insert(*qt);
  }
  return out;
}

std::vector<Eigen::VectorXf> select_vectors(const ActivationSet& set, int layer, const std::set<QueryType>& labels) {
  if (std::find(set.layers_present.begin(), set.layers_present.end(), layer) == set.layers_present.end()) {
    throw Error("cli", ErrorCode::LayerOutOfRange, fmt::format("layer {} not present in dump", layer));
  }
  return set.vectors(static_cast<std::uint16_t>(layer),
                     [&](QueryType qt) { return labels.empty() || labels.count(qt) > 0; });
}

void save_calibration(const Calibration& c, const fs::path& path) {
  json j{{"threshold", c.threshold},
         {"mean_conflict", c.mean_conflict},
         {"mean_nonconflict", c.mean_nonconflict},
         {"accuracy", c.accuracy},
         {"defined", c.defined}};
  write_text(path, j.dump(2) + "\n");
}

Calibration load_calibration(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", ErrorCode::IoError, "cannot read " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("threshold") || !j["threshold"].is_number()) {
    throw Error("cli", ErrorCode::InvalidArgument, path.string() + ": not a calibration file");
  }
  Calibration c;
  c.threshold = j["threshold"].get<double>();
  c.mean_conflict = j.value("mean_conflict", 0.0);
  c.mean_nonconflict = j.value("mean_nonconflict", 0.0);
  c.accuracy = j.value("accuracy", 0.5);
  c.defined = j.value("defined", true);
  return c;
}

std::vector<QueryRecord> read_corpus_or_throw(const fs::path& path) {
  auto result = ingest(path);
  if (result.stats.malformed + result.stats.duplicates > 0) {
    log_info("corpus", {{"path", path.string()},
                        {"dropped_malformed", std::to_string(result.stats.malformed)},
                        {"dropped_duplicates", std::to_string(result.stats.duplicates)}});
  }
  return std::move(result.records);
}

// ---------------------------------------------------------------- gen
Command add_gen(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("gen", "Build the synthetic role/fact world and its corpus");
  struct Opts {
    WorldParams params;
    std::string world_out;
    std::string corpus_out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--series", o->params.n_series, "Number of series");
  sub->add_option("--roles", o->params.roles_per_series, "Roles per series");
  sub->add_option("--facts", o->params.facts_per_series, "Facts per series");
  sub->add_option("--knowledge", o->params.knowledge_per_role, "Facts known per role");
  sub->add_option("--holdout", o->params.holdout_fraction, "Held-out fraction per label");
  sub->add_option("--seed", o->params.seed, "World seed");
  sub->add_option("--world-out", o->world_out, "World file to write")->required();
  sub->add_option("--corpus-out", o->corpus_out, "Corpus JSONL to write");
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->world_out);
            if (!o->corpus_out.empty()) ctx.claim(o->corpus_out);
            const auto snapshot = snapshot_path_for(o->world_out);
            ctx.claim(snapshot);
            const RoleFactWorld world = build_world(o->params);
            save_world(world, o->world_out);
            if (!o->corpus_out.empty()) write_corpus(toyworld_to_corpus(world), o->corpus_out);
            write_snapshot(*sub, snapshot);
            std::map<QueryType, int> counts;
            for (const auto& p : world.prompts) ++counts[p.label];
            KeyValues kv{{"prompts", std::to_string(world.prompts.size())}, {"vocab", std::to_string(world.vocab_required())}};
            for (const auto& [qt, n] : counts) kv.emplace_back(std::string(to_string(qt)), std::to_string(n));
            log_info("gen", kv);
          }};
}

// ---------------------------------------------------------------- train
Command add_train(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("train", "Train the toy transformer on a world");
  struct Opts {
    std::string world;
    std::string out;
    ToyConfig config;
    TrainOptions train;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--world", o->world, "World file")->required();
  sub->add_option("--out", o->out, "Checkpoint to write")->required();
  sub->add_option("--steps", o->train.steps, "Optimizer steps");
  sub->add_option("--lr", o->train.learning_rate, "Adam learning rate");
  sub->add_option("--batch", o->train.batch_size, "Batch size");
  sub->add_option("--weight-decay", o->train.weight_decay, "Decoupled weight decay on matrices");
  sub->add_option("--model-seed", o->config.seed, "Initialization and sampling seed");
  sub->add_option("--vocab", o->config.vocab_size, "Vocabulary size");
  sub->add_option("--d-model", o->config.d_model, "Residual width");
  sub->add_option("--layers", o->config.n_layers, "Number of blocks");
  sub->add_option("--heads", o->config.n_heads, "Attention heads");
  sub->add_option("--max-seq", o->config.max_seq, "Context length");
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            const RoleFactWorld world = load_world(o->world);
            const TrainResult r = train_toy(o->config, world, o->train);
            save_checkpoint(r.model, o->out);
            write_snapshot(*sub, snapshot);
            KeyValues kv{{"final_loss", fmt_double(r.final_loss)}};
            const auto behavior = evaluate_behavior(r.model, world, PromptSplit::HeldOut, nullptr);
            for (const auto& [qt, b] : behavior.categories) {
              kv.emplace_back(fmt::format("heldout_{}_accuracy", to_string(qt)), fmt_double(b.accuracy()));
            }
            log_info("train", kv);
          }};
}

// ---------------------------------------------------------------- collect
Command add_collect(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("collect", "Capture last-token hidden states of the toy model into an RSD1 dump");
  struct Opts {
    std::string world;
    std::string model;
    std::string out;
    std::vector<int> layers;
    std::string split = "all";
    std::vector<std::string> labels;
    std::string model_id = "toy";
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--world", o->world, "World file")->required();
  sub->add_option("--model", o->model, "Checkpoint")->required();
  sub->add_option("--out", o->out, "Dump to write")->required();
  sub->add_option("--layers", o->layers, "Layers to capture (default all)");
  sub->add_option("--split", o->split, "all, train or heldout")->check(CLI::IsMember({"all", "train", "heldout"}));
  sub->add_option("--labels", o->labels, "Query types to keep (default all)");
  sub->add_option("--model-id", o->model_id, "Model id stored in the dump");
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            const RoleFactWorld world = load_world(o->world);
            const ToyModel model = load_checkpoint(o->model);
            std::vector<int> layers = o->layers;
            if (layers.empty()) {
              for (int l = 0; l < model.config.n_layers; ++l) layers.push_back(l);
            }
            const auto set = collect_activations(model, world, layers, *parse_split(o->split), o->model_id,
                                                 parse_labels(o->labels));
            const auto bytes = write_dump(set, o->out);
            write_snapshot(*sub, snapshot);
            log_info("collect", {{"records", std::to_string(set.records.size())},
                                 {"hidden_dim", std::to_string(set.hidden_dim)},
                                 {"bytes", std::to_string(bytes)}});
          }};
}

// ---------------------------------------------------------------- direction
Command add_direction(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("direction", "Estimate a rejection direction from conflict/non-conflict dumps");
  struct Opts {
    std::string conflict;
    std::string nonconflict;
    std::string calib_conflict;
    std::string calib_nonconflict;
    std::vector<std::string> conflict_labels = {"role_setting"};
    std::vector<std::string> nonconflict_labels = {"non_conflict"};
    int layer = 0;
    double mask_quantile = 0.5;
    std::uint64_t seed = 0;
    std::string out;
    std::string calibration_out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--conflict", o->conflict, "Dump with conflict states")->required();
  sub->add_option("--nonconflict", o->nonconflict, "Dump with non-conflict states")->required();
  sub->add_option("--conflict-labels", o->conflict_labels, "Query types taken from the conflict dump ('any' = all)");
  sub->add_option("--nonconflict-labels", o->nonconflict_labels,
                  "Query types taken from the non-conflict dump ('any' = all)");
  sub->add_option("--layer", o->layer, "Layer of the states")->required();
  sub->add_option("--mask-quantile", o->mask_quantile, "Fraction of components zeroed by variance");
  sub->add_option("--seed", o->seed, "Pairing seed");
  sub->add_option("--calib-conflict", o->calib_conflict, "Hold-out conflict dump for threshold calibration");
  sub->add_option("--calib-nonconflict", o->calib_nonconflict, "Hold-out non-conflict dump for calibration");
  sub->add_option("--out", o->out, "Direction JSON to write")->required();
  sub->add_option("--calibration-out", o->calibration_out, "Calibration JSON to write");
  return {sub, [sub, o, &ctx] {
            const bool calibrate = !o->calib_conflict.empty() || !o->calib_nonconflict.empty();
            if (calibrate && (o->calib_conflict.empty() || o->calib_nonconflict.empty() || o->calibration_out.empty())) {
              throw usage("calibration needs --calib-conflict, --calib-nonconflict and --calibration-out");
            }
            if (!calibrate && !o->calibration_out.empty()) throw usage("--calibration-out needs calibration dumps");
            ctx.claim(o->out);
            if (calibrate) ctx.claim(o->calibration_out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);

            const auto conflict_labels = parse_labels(o->conflict_labels);
            const auto nonconflict_labels = parse_labels(o->nonconflict_labels);
            const ActivationSet cset = read_dump(o->conflict);
            const ActivationSet nset = read_dump(o->nonconflict);
            if (cset.hidden_dim != nset.hidden_dim) {
              throw Error("cli", ErrorCode::DimensionMismatch, "conflict and non-conflict dumps differ in hidden_dim");
            }
            const auto cv = select_vectors(cset, o->layer, conflict_labels);
            const auto nv = select_vectors(nset, o->layer, nonconflict_labels);
            RejectionDirection dir = compute_rejection_direction(std::span<const Eigen::VectorXf>(cv),
                                                                 std::span<const Eigen::VectorXf>(nv),
                                                                 o->mask_quantile, o->seed);
            dir.layer = o->layer;
            dir.source_model_id = cset.model_id;
            save_direction(dir, o->out);
            KeyValues kv{{"n_conflict", std::to_string(dir.n_conflict)},
                         {"n_nonconflict", std::to_string(dir.n_nonconflict)},
                         {"norm", fmt_double(dir.vector.norm())}};
            if (calibrate) {
              const ActivationSet hc = read_dump(o->calib_conflict);
              const ActivationSet hn = read_dump(o->calib_nonconflict);
              const auto hcv = select_vectors(hc, o->layer, conflict_labels);
              const auto hnv = select_vectors(hn, o->layer, nonconflict_labels);
              const Calibration cal = calibrate_threshold(dir, std::span<const Eigen::VectorXf>(hcv),
                                                          std::span<const Eigen::VectorXf>(hnv));
              save_calibration(cal, o->calibration_out);
              kv.emplace_back("threshold", fmt_double(cal.threshold));
              kv.emplace_back("calibration_accuracy", fmt_double(cal.accuracy));
            }
            write_snapshot(*sub, snapshot);
            log_info("direction", kv);
          }};
}

// ---------------------------------------------------------------- steer-eval
std::string responses_jsonl(const std::vector<ToyResponse>& responses) {
  std::string out;
  for (const auto& r : responses) {
    json j{{"id", r.id}, {"query_type", std::string(to_string(r.label))}, {"response", r.text},
           {"steered_steps", r.steered_steps}};
    out += j.dump() + "\n";
  }
  return out;
}

Command add_steer_eval(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("steer-eval", "Compare unsteered and steered toy-model behavior");
  struct Opts {
    std::string world;
    std::string model;
    std::string direction;
    std::string calibration;
    double threshold = kGateDisabled;
    double scale = 1.0;
    int layer = -1;
    int max_new = 1;
    bool first_step_only = false;
    std::string split = "all";
    std::string model_id = "toy";
    std::string out_dir;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--world", o->world, "World file")->required();
  sub->add_option("--model", o->model, "Checkpoint")->required();
  sub->add_option("--direction", o->direction, "Direction JSON")->required();
  auto* cal = sub->add_option("--calibration", o->calibration, "Calibration JSON supplying the threshold");
  auto* thr = sub->add_option("--threshold", o->threshold, "Cosine threshold");
  cal->excludes(thr);
  sub->add_option("--scale", o->scale, "Steering scale alpha");
  sub->add_option("--layer", o->layer, "Hooked layer (default: the direction's layer)");
  sub->add_option("--max-new", o->max_new, "Tokens generated per prompt");
  sub->add_flag("--first-step-only", o->first_step_only, "Steer only the first decoding step");
  sub->add_option("--split", o->split, "all, train or heldout")->check(CLI::IsMember({"all", "train", "heldout"}));
  sub->add_option("--model-id", o->model_id, "Id of the steered model, recorded when the direction is foreign");
  sub->add_option("--out-dir", o->out_dir, "Output directory")->required();
  return {sub, [sub, o, &ctx] {
            const fs::path dir_path = o->out_dir;
            const std::vector<fs::path> outputs = {
                dir_path / "behavior.csv",          dir_path / "baseline_responses.jsonl",
                dir_path / "steered_responses.jsonl", dir_path / "baseline_scores.jsonl",
                dir_path / "steered_scores.jsonl",    snapshot_path_for(dir_path, true)};
            for (const auto& p : outputs) ctx.claim(p);
            fs::create_directories(dir_path);

            const RoleFactWorld world = load_world(o->world);
            const ToyModel model = load_checkpoint(o->model);
            RejectionDirection direction = load_direction(o->direction);
            if (!direction.source_model_id.empty() && direction.source_model_id != o->model_id) {
              direction = apply_foreign_direction(direction, static_cast<std::uint32_t>(model.config.d_model),
                                                  o->model_id);
            } else if (direction.dim() != model.config.d_model) {
              throw Error("steering", ErrorCode::DimensionMismatch, "direction does not match d_model");
            }
            SteeringPlan plan;
            plan.direction = direction;
            plan.config.layer = o->layer >= 0 ? o->layer : direction.layer;
            plan.config.threshold = o->calibration.empty() ? o->threshold : load_calibration(o->calibration).threshold;
            plan.config.scale = o->scale;
            plan.config.apply_every_step = !o->first_step_only;
            plan.config.validate();
            if (plan.config.layer >= model.config.n_layers) {
              throw Error("toymodel", ErrorCode::LayerOutOfRange, "steering layer out of range");
            }

            const PromptSplit split = *parse_split(o->split);
            const auto base = evaluate_behavior(model, world, split, nullptr, o->max_new);
            const auto steered = evaluate_behavior(model, world, split, &plan, o->max_new);

            std::string csv = "category,n,refuse_rate_baseline,refuse_rate_steered,accuracy_baseline,accuracy_steered\n";
            KeyValues kv;
            for (const auto& [qt, b] : base.categories) {
              const auto& s = steered.categories.at(qt);
              csv += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(qt), b.n, b.refuse_rate(),
                                 s.refuse_rate(), b.accuracy(), s.accuracy());
              kv.emplace_back(fmt::format("{}_refuse", to_string(qt)),
                              fmt::format("{:.4f}->{:.4f}", b.refuse_rate(), s.refuse_rate()));
            }
            write_text(outputs[0], csv);
            write_text(outputs[1], responses_jsonl(base.responses));
            write_text(outputs[2], responses_jsonl(steered.responses));

            const auto corpus = toyworld_to_corpus(world);
            std::map<std::string, const QueryRecord*> by_id;
            for (const auto& r : corpus) by_id[r.id] = &r;
            const MockJudge judge;
            auto score_all = [&](const std::vector<ToyResponse>& responses, const fs::path& path) {
              std::vector<JudgeItem> items;
              for (const auto& r : responses) {
                items.push_back({*by_id.at(r.id), r.text.empty() ? std::string("<empty>") : r.text, {}});
              }
              const auto result = score_batch(judge, items, 1);
              write_results(items, result, path);
            };
            score_all(base.responses, outputs[3]);
            score_all(steered.responses, outputs[4]);
            write_snapshot(*sub, outputs[5]);
            kv.emplace_back("threshold", fmt_double(plan.config.threshold));
            log_info("steer-eval", kv);
          }};
}

// ---------------------------------------------------------------- probe
Command add_probe(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("probe", "Layer-wise probe sweep over an activation dump");
  struct Opts {
    std::string dump;
    std::string out;
    std::string results_out;
    ProbeConfig config;
    SweepOptions sweep;
    std::vector<std::string> train_categories = {"non_conflict", "role_setting", "factual_knowledge"};
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--dump", o->dump, "Activation dump")->required();
  sub->add_option("--out", o->out, "Summary CSV to write")->required();
  sub->add_option("--results-out", o->results_out, "Per-seed results JSON");
  sub->add_option("--layers", o->sweep.layers, "Layers to probe (default all)");
  sub->add_option("--seeds", o->sweep.seeds, "Probe seeds");
  sub->add_option("--epochs", o->config.epochs, "Training epochs");
  sub->add_option("--lr", o->config.learning_rate, "Adam learning rate");
  sub->add_option("--hidden", o->config.hidden_dim, "Hidden units");
  sub->add_option("--batch", o->config.batch_size, "Batch size");
  sub->add_option("--train-per", o->sweep.train_per_category, "Training samples per category");
  sub->add_option("--test-per", o->sweep.test_per_category, "Test samples per category");
  sub->add_option("--train-categories", o->train_categories, "Categories used for training");
  sub->add_option("--threads", o->sweep.threads, "Worker threads");
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->out);
            if (!o->results_out.empty()) ctx.claim(o->results_out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            const ActivationSet set = read_dump(o->dump);
            SweepOptions sweep = o->sweep;
            const auto cats = parse_labels(o->train_categories);
            sweep.train_categories.assign(cats.begin(), cats.end());
            if (sweep.train_categories.empty()) sweep.train_categories.assign(kAllQueryTypes.begin(), kAllQueryTypes.end());
            ProbeConfig config = o->config;
            config.input_dim = static_cast<int>(set.hidden_dim);
            const SweepResult result = layerwise_sweep(set, config, sweep);
            write_text(o->out, sweep_csv(result.summary));
            if (!o->results_out.empty()) {
              json arr = json::array();
              for (const auto& r : result.results) {
                json acc = json::object();
                for (const auto& [qt, a] : r.accuracy) acc[std::string(to_string(qt))] = a;
                json j{{"layer", r.layer}, {"seed", r.seed}, {"accuracy", acc}};
                if (r.contextual) j["contextual"] = *r.contextual;
                if (r.parametric) j["parametric"] = *r.parametric;
                arr.push_back(j);
              }
              write_text(o->results_out, arr.dump(1) + "\n");
            }
            write_snapshot(*sub, snapshot);
            KeyValues kv{{"probes", std::to_string(result.results.size())}};
            for (const auto& s : result.summary) {
              if (s.category == "contextual" || s.category == "parametric") {
                kv.emplace_back(fmt::format("layer{}_{}", s.layer, s.category), fmt_double(s.mean_accuracy));
              }
            }
            log_info("probe", kv);
          }};
}

// ---------------------------------------------------------------- embed
double class_silhouette(const Eigen::MatrixXd& pts, const std::vector<QueryType>& labels, ConflictClass cls) {
  std::vector<Eigen::Index> rows;
  std::vector<int> lab;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = conflict_class(labels[i]);
    if (c == cls || c == ConflictClass::NonConflict) {
      rows.push_back(static_cast<Eigen::Index>(i));
      lab.push_back(c == cls ? 1 : 0);
    }
  }
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), pts.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = pts.row(rows[k]);
  return silhouette(sub, lab);
}

Command add_embed(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("embed", "2-D embedding of one layer of an activation dump");
  struct Opts {
    std::string dump;
    std::string corpus;
    int layer = -1;
    std::string method = "tsne";
    EmbeddingConfig config;
    std::string out;
    std::string svg_out;
    std::string metrics_out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--dump", o->dump, "Activation dump")->required();
  sub->add_option("--corpus", o->corpus, "Corpus JSONL for role/series labels");
  sub->add_option("--layer", o->layer, "Layer (default: last present)");
  sub->add_option("--method", o->method, "pca or tsne")->check(CLI::IsMember({"pca", "tsne"}));
  sub->add_option("--perplexity", o->config.tsne_perplexity, "t-SNE perplexity");
  sub->add_option("--iterations", o->config.tsne_iterations, "t-SNE iterations");
  sub->add_option("--tsne-lr", o->config.tsne_learning_rate, "t-SNE learning rate");
  sub->add_option("--seed", o->config.seed, "t-SNE seed");
  sub->add_option("--out", o->out, "Points CSV to write")->required();
  sub->add_option("--svg-out", o->svg_out, "Scatter plot SVG to write");
  sub->add_option("--metrics-out", o->metrics_out, "Silhouette metrics JSON to write");
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->out);
            if (!o->svg_out.empty()) ctx.claim(o->svg_out);
            if (!o->metrics_out.empty()) ctx.claim(o->metrics_out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            const ActivationSet set = read_dump(o->dump);
            if (set.layers_present.empty()) throw Error("embed", ErrorCode::InvalidArgument, "dump has no records");
            const int layer = o->layer >= 0 ? o->layer : set.layers_present.back();
            std::map<std::string, std::pair<std::string, std::string>> meta;
            if (!o->corpus.empty()) {
              for (const auto& r : read_corpus_or_throw(o->corpus)) meta[r.id] = {r.role, r.series};
            }
            std::vector<const ActivationRecord*> recs;
            for (const ActivationRecord* r : set.at_layer(static_cast<std::uint16_t>(layer))) {
              if (r->position == kLastToken) recs.push_back(r);
            }
            if (recs.empty()) throw Error("cli", ErrorCode::LayerOutOfRange, fmt::format("no records at layer {}", layer));
            Eigen::MatrixXd data(static_cast<Eigen::Index>(recs.size()), set.hidden_dim);
            std::vector<QueryType> labels;
            for (std::size_t i = 0; i < recs.size(); ++i) {
              data.row(static_cast<Eigen::Index>(i)) = recs[i]->vector.cast<double>().transpose();
              labels.push_back(recs[i]->label);
            }
            Eigen::MatrixXd pts;
            json metrics;
            if (o->method == "pca") {
              const PcaResult pca = pca2(data);
              pts = pca.points;
              metrics["explained"] = {pca.explained[0], pca.explained[1]};
            } else {
              pts = tsne2(data, o->config);
            }
            std::vector<EmbeddedPoint> points;
            for (std::size_t i = 0; i < recs.size(); ++i) {
              EmbeddedPoint p;
              p.query_id = recs[i]->query_id;
              p.label = recs[i]->label;
              if (auto it = meta.find(p.query_id); it != meta.end()) std::tie(p.role, p.series) = it->second;
              p.x = pts(static_cast<Eigen::Index>(i), 0);
              p.y = pts(static_cast<Eigen::Index>(i), 1);
              points.push_back(std::move(p));
            }
            write_text(o->out, points_csv(points));
            if (!o->svg_out.empty()) emit_scatter_svg(points, o->svg_out);
            KeyValues kv{{"points", std::to_string(points.size())}, {"layer", std::to_string(layer)}};
            for (auto [cls, name] : {std::pair{ConflictClass::Contextual, "contextual"},
                                     std::pair{ConflictClass::Parametric, "parametric"}}) {
              try {
                const double s = class_silhouette(pts, labels, cls);
                metrics[fmt::format("silhouette_{}", name)] = s;
                kv.emplace_back(fmt::format("silhouette_{}", name), fmt_double(s));
              } catch (const Error& e) {
                if (e.code() != ErrorCode::SingleCluster) throw;
              }
            }
            if (!o->metrics_out.empty()) write_text(o->metrics_out, metrics.dump(2) + "\n");
            write_snapshot(*sub, snapshot);
            log_info("embed", kv);
          }};
}

// ---------------------------------------------------------------- judge
Command add_judge(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("judge", "Score responses with the rubric judge");
  struct Opts {
    std::string corpus;
    std::string responses;
    std::string judge = "mock";
    JudgeClientConfig client;
    std::string applicability = "all";
    std::string role_profiles;
    int parallel = 4;
    int timeout_s = 60;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--corpus", o->corpus, "Corpus JSONL")->required();
  sub->add_option("--responses", o->responses, "Responses JSONL with id and response")->required();
  sub->add_option("--judge", o->judge, "mock or http")->check(CLI::IsMember({"mock", "http"}));
  sub->add_option("--endpoint", o->client.endpoint, "Chat-completions endpoint");
  sub->add_option("--judge-model", o->client.model, "Judge model name");
  sub->add_option("--timeout", o->timeout_s, "Per-call timeout in seconds");
  sub->add_option("--max-retries", o->client.max_retries, "Requests per response before giving up");
  sub->add_option("--template", o->client.template_id, "Request template id");
  sub->add_option("--template-dir", o->client.template_dir, "Directory of request templates");
  sub->add_option("--api-key-env", o->client.api_key_env, "Environment variable holding the API key");
  sub->add_option("--applicability", o->applicability, "all or skip-refusal")
      ->check(CLI::IsMember({"all", "skip-refusal"}));
  sub->add_option("--role-profiles", o->role_profiles, "JSON object mapping role to profile text");
  sub->add_option("--parallel", o->parallel, "Concurrent judge calls");
  sub->add_option("--out", o->out, "Results JSONL to write")->required();
  return {sub, [sub, o, &ctx] {
            ctx.claim(o->out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            const auto mode =
                o->applicability == "all" ? ApplicabilityMode::AllNine : ApplicabilityMode::SkipRefusalOnNonConflict;
            const auto corpus = read_corpus_or_throw(o->corpus);
            std::map<std::string, const QueryRecord*> by_id;
            for (const auto& r : corpus) by_id[r.id] = &r;
            std::map<std::string, std::string> profiles;
            if (!o->role_profiles.empty()) {
              std::ifstream in(o->role_profiles);
              const json j = json::parse(in, nullptr, false);
              if (j.is_discarded() || !j.is_object()) {
                throw Error("judge", ErrorCode::InvalidArgument, o->role_profiles + ": expected a JSON object");
              }
              for (auto it = j.begin(); it != j.end(); ++it) profiles[it.key()] = it->get<std::string>();
            }
            std::vector<JudgeItem> items;
            std::ifstream in(o->responses);
            if (!in) throw Error("judge", ErrorCode::IoError, "cannot read " + o->responses);
            std::string line;
            while (std::getline(in, line)) {
              if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
              const json j = json::parse(line, nullptr, false);
              if (j.is_discarded() || !j.contains("id") || !j.contains("response")) {
                throw Error("judge", ErrorCode::InvalidArgument, "malformed response line: " + line);
              }
              const auto it = by_id.find(j["id"].get<std::string>());
              if (it == by_id.end()) {
                throw Error("judge", ErrorCode::InvalidArgument, "response for unknown id " + j["id"].dump());
              }
              const auto prof = profiles.find(it->second->role);
              items.push_back({*it->second, j["response"].get<std::string>(),
                               prof == profiles.end() ? it->second->role : prof->second});
            }
            std::unique_ptr<Judge> judge;
            if (o->judge == "mock") {
              judge = std::make_unique<MockJudge>(mode);
            } else {
              JudgeClientConfig cfg = o->client;
              cfg.mode = mode;
              cfg.timeout = std::chrono::seconds(o->timeout_s);
              judge = std::make_unique<JudgeClient>(cfg);
            }
            const BatchResult result = score_batch(*judge, items, o->parallel);
            write_results(items, result, o->out);
            write_snapshot(*sub, snapshot);
            log_info("judge", {{"scored", std::to_string(items.size() - result.failures.size())},
                               {"failed", std::to_string(result.failures.size())}});
            if (!result.failures.empty()) {
              for (const auto& f : result.failures) log_info("judge", {{"failed_id", f.id}, {"reason", f.message}});
              const bool unparseable = std::all_of(result.failures.begin(), result.failures.end(), [](const auto& f) {
                return f.message.find("unparseable") != std::string::npos;
              });
              throw Error("judge", unparseable ? ErrorCode::UnparseableVerdict : ErrorCode::JudgeUnavailable,
                          fmt::format("{} of {} responses could not be scored", result.failures.size(), items.size()));
            }
          }};
}

// ---------------------------------------------------------------- report
ScoreTable load_table(const fs::path& path, const std::string& name, bool partial) {
  std::vector<TypedScore> scores;
  std::string model = name;
  if (path.extension() == ".jsonl") {
    for (const auto& s : read_results(path)) scores.emplace_back(s.query_type, s.sample_score);
  } else {
    std::ifstream in(path);
    if (!in) throw Error("judge", ErrorCode::IoError, "cannot read " + path.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("judge", ErrorCode::InvalidArgument, path.string() + ": bad table");
    if (model.empty()) model = j.value("model", "");
    auto bad = [&] { return Error("judge", ErrorCode::InvalidArgument, path.string() + ": bad score entry"); };
    if (j.contains("cells")) {
      for (auto it = j["cells"].begin(); it != j["cells"].end(); ++it) {
        const auto qt = parse_query_type(it.key());
        if (!qt || !it->is_number()) throw bad();
        scores.emplace_back(*qt, it->get<double>());
      }
    }
    if (j.contains("scores")) {
      for (const auto& e : j["scores"]) {
        if (!e.is_object() || !e.contains("query_type") || !e.contains("sample_score")) throw bad();
        const auto qt = parse_query_type(e["query_type"].get<std::string>());
        if (!qt || !e["sample_score"].is_number()) throw bad();
        scores.emplace_back(*qt, e["sample_score"].get<double>());
      }
    }
  }
  if (model.empty()) model = path.stem().string();
  return partial ? aggregate_partial(scores, model) : aggregate(scores, model);
}

Command add_report(CLI::App& app, Context& ctx) {
  auto* sub = app.add_subcommand("report", "Render score tables and deltas");
  struct Opts {
    std::vector<std::string> inputs;
    std::vector<std::string> names;
    std::string baseline;
    std::string baseline_name;
    bool partial = false;
    std::string out;
    std::string csv_out;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--input", o->inputs, "Judge results (.jsonl) or table (.json) files")->required();
  sub->add_option("--name", o->names, "Row names, one per input");
  sub->add_option("--baseline", o->baseline, "Table the inputs are compared against");
  sub->add_option("--baseline-name", o->baseline_name, "Row name of the baseline");
  sub->add_flag("--partial", o->partial, "Allow missing query types (average over present cells)");
  sub->add_option("--out", o->out, "Text table to write")->required();
  sub->add_option("--csv-out", o->csv_out, "CSV table to write");
  return {sub, [sub, o, &ctx] {
            if (!o->names.empty() && o->names.size() != o->inputs.size()) throw usage("one --name per --input");
            ctx.claim(o->out);
            if (!o->csv_out.empty()) ctx.claim(o->csv_out);
            const auto snapshot = snapshot_path_for(o->out);
            ctx.claim(snapshot);
            std::vector<ScoreTable> rows;
            std::vector<std::optional<TableDelta>> deltas;
            std::optional<ScoreTable> base;
            if (!o->baseline.empty()) {
              base = load_table(o->baseline, o->baseline_name, o->partial);
              rows.push_back(*base);
              deltas.emplace_back();
            }
            for (std::size_t i = 0; i < o->inputs.size(); ++i) {
              rows.push_back(load_table(o->inputs[i], o->names.empty() ? "" : o->names[i], o->partial));
              if (base) deltas.emplace_back(compare_tables(*base, rows.back()));
            }
            write_text(o->out, render_text(rows, deltas));
            if (!o->csv_out.empty()) write_text(o->csv_out, render_csv(rows, deltas));
            write_snapshot(*sub, snapshot);
            KeyValues kv;
            for (const auto& r : rows) {
              if (auto avg = r.overall_partial()) kv.emplace_back("average[" + r.model + "]", format2(*avg));
            }
            log_info("report", kv);
          }};
}

// ---------------------------------------------------------------- corpus
std::vector<Command> add_corpus(CLI::App& app) {
  auto* sub = app.add_subcommand("corpus", "Corpus validation and statistics");
  sub->require_subcommand(1);
  auto path = std::make_shared<std::string>();
  auto* validate = sub->add_subcommand("validate", "Check a corpus; exit 3 if any record is dropped");
  validate->add_option("file", *path, "Corpus JSONL")->required();
  auto* stat = sub->add_subcommand("stats", "Per-type and per-series counts as JSON on stdout");
  stat->add_option("file", *path, "Corpus JSONL")->required();

  auto stats_json = [](const CorpusStats& s) {
    json counts = json::object();
    for (QueryType qt : kAllQueryTypes) counts[std::string(to_string(qt))] = s.count(qt);
    return json{{"counts", counts},
                {"per_series", s.per_series},
                {"total", s.total()},
                {"duplicates", s.duplicates},
                {"malformed", s.malformed},
                {"drop_reasons", s.drop_reasons}};
  };
  return {{validate,
           [path, stats_json] {
             const auto r = ingest(*path);
             std::cout << stats_json(r.stats).dump(2) << '\n';
             if (r.stats.malformed + r.stats.duplicates > 0) {
               throw Error("corpus", ErrorCode::InvalidArgument,
                           fmt::format("{} malformed and {} duplicate records", r.stats.malformed, r.stats.duplicates));
             }
           }},
          {stat, [path, stats_json] { std::cout << stats_json(ingest(*path).stats).dump(2) << '\n'; }}};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app, Context& ctx) {
  std::vector<Command> cmds = {add_gen(app, ctx),      add_train(app, ctx), add_collect(app, ctx),
                               add_direction(app, ctx), add_steer_eval(app, ctx), add_probe(app, ctx),
                               add_embed(app, ctx),    add_judge(app, ctx), add_report(app, ctx)};
  for (auto& c : add_corpus(app)) cmds.push_back(std::move(c));
  return cmds;
}

}  // namespace rsteer::cli
