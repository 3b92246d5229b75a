#include "rsteer/toy_model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include <nlohmann/json.hpp>

#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"
#include "toy_internal.hpp"

namespace rsteer {

using json = nlohmann::json;

void ToyConfig::validate(int min_vocab) const {
  if (vocab_size <= 0 || d_model <= 0 || n_layers <= 0 || n_heads <= 0 || max_seq <= 0) {
    throw Error("toymodel", ErrorCode::InvalidArgument, "toy config sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw Error("toymodel", ErrorCode::InvalidArgument, "d_model must be divisible by n_heads");
  }
  if (vocab_size < min_vocab) {
    throw Error("toymodel", ErrorCode::InvalidArgument,
                "vocab_size " + std::to_string(vocab_size) + " is below the " + std::to_string(min_vocab) +
                    " tokens the task needs");
  }
}

ToyParams ToyParams::zeros(const ToyConfig& c) {
  const int d = c.d_model;
  const int m = c.mlp_dim();
  ToyParams p;
  p.token_embedding = Eigen::MatrixXd::Zero(c.vocab_size, d);
  p.position_embedding = Eigen::MatrixXd::Zero(c.max_seq, d);
  p.blocks.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& b : p.blocks) {
    b.ln1_gain = b.ln1_bias = b.ln2_gain = b.ln2_bias = Eigen::VectorXd::Zero(d);
    b.w_query = b.w_key = b.w_value = b.w_out = Eigen::MatrixXd::Zero(d, d);
    b.b_query = b.b_key = b.b_value = b.b_out = Eigen::VectorXd::Zero(d);
    b.w_up = Eigen::MatrixXd::Zero(d, m);
    b.b_up = Eigen::VectorXd::Zero(m);
    b.w_down = Eigen::MatrixXd::Zero(m, d);
    b.b_down = Eigen::VectorXd::Zero(d);
  }
  p.final_gain = p.final_bias = Eigen::VectorXd::Zero(d);
  p.unembedding = Eigen::MatrixXd::Zero(d, c.vocab_size);
  return p;
}

namespace {

template <typename Params, typename Out, typename Fn>
void visit_tensors(Params& p, Out& out, Fn&& make) {
  out.push_back(make(p.token_embedding));
  out.push_back(make(p.position_embedding));
  for (auto& b : p.blocks) {
    for (auto* t : {&b.ln1_gain, &b.ln1_bias}) out.push_back(make(*t));
    for (auto* t : {&b.w_query, &b.w_key, &b.w_value, &b.w_out}) out.push_back(make(*t));
    for (auto* t : {&b.b_query, &b.b_key, &b.b_value, &b.b_out}) out.push_back(make(*t));
    for (auto* t : {&b.ln2_gain, &b.ln2_bias}) out.push_back(make(*t));
    out.push_back(make(b.w_up));
    out.push_back(make(b.b_up));
    out.push_back(make(b.w_down));
    out.push_back(make(b.b_down));
  }
  out.push_back(make(p.final_gain));
  out.push_back(make(p.final_bias));
  out.push_back(make(p.unembedding));
}

}  // namespace

std::vector<std::span<double>> ToyParams::tensors() {
  std::vector<std::span<double>> out;
  visit_tensors(*this, out, [](auto& t) { return std::span<double>(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

std::vector<std::span<const double>> ToyParams::tensors() const {
  std::vector<std::span<const double>> out;
  visit_tensors(*this, out,
                [](const auto& t) { return std::span<const double>(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

std::vector<std::string> ToyParams::tensor_names() const {
  std::vector<std::string> names = {"token_embedding", "position_embedding"};
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    for (const char* n : {"ln1_gain", "ln1_bias", "w_query", "w_key", "w_value", "w_out", "b_query", "b_key",
                          "b_value", "b_out", "ln2_gain", "ln2_bias", "w_up", "b_up", "w_down", "b_down"}) {
      names.push_back("blocks." + std::to_string(l) + "." + n);
    }
  }
  for (const char* n : {"final_gain", "final_bias", "unembedding"}) names.emplace_back(n);
  return names;
}

std::size_t ToyParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

bool ToyParams::operator==(const ToyParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    // Bitwise comparison; distinguishes -0.0 from 0.0 and compares NaN payloads.
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      if (std::bit_cast<std::uint64_t>(a[i][k]) != std::bit_cast<std::uint64_t>(b[i][k])) return false;
    }
  }
  return true;
}

ToyModel ToyModel::initialize(const ToyConfig& config) {
  config.validate();
  ToyModel model{config, ToyParams::zeros(config)};
  Rng rng(config.seed);
  const double d = config.d_model;
  auto fill = [&](Eigen::MatrixXd& m, double stddev) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal(0.0, stddev));
  };
  fill(model.params.token_embedding, 1.0);
  fill(model.params.position_embedding, 0.5);
  for (auto& b : model.params.blocks) {
    b.ln1_gain.setOnes();
    b.ln2_gain.setOnes();
    for (auto* w : {&b.w_query, &b.w_key, &b.w_value, &b.w_out, &b.w_up}) fill(*w, 1.0 / std::sqrt(d));
    fill(b.w_down, 1.0 / std::sqrt(static_cast<double>(config.mlp_dim())));
  }
  model.params.final_gain.setOnes();
  fill(model.params.unembedding, 1.0 / std::sqrt(d));
  return model;
}

namespace detail {

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain, const Eigen::VectorXd& bias,
                           LayerNormCache* cache) {
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean();
  const Eigen::VectorXd inv_std = (var.array() + kLayerNormEps).rsqrt();
  Eigen::MatrixXd normalized = inv_std.asDiagonal() * centered;
  Eigen::MatrixXd y = (normalized.array().rowwise() * gain.transpose().array()).rowwise() + bias.transpose().array();
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
  }
  return y;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormCache& cache, const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& dgain, Eigen::VectorXd& dbias) {
  dgain += (dy.array() * cache.normalized.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  const Eigen::MatrixXd dn = dy.array().rowwise() * gain.transpose().array();
  const Eigen::VectorXd mean_dn = dn.rowwise().mean();
  const Eigen::VectorXd mean_dn_n = (dn.array() * cache.normalized.array()).rowwise().mean();
  Eigen::MatrixXd dx = dn.colwise() - mean_dn;
  dx -= mean_dn_n.asDiagonal() * cache.normalized;
  return cache.inv_std.asDiagonal() * dx;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u))); }

double gelu_derivative(double u) {
  const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

Eigen::MatrixXd run_blocks(const ToyModel& model, std::span<const int> tokens, std::span<const HookSpec> hooks,
                           ForwardCache* cache, ForwardResult* result) {
  const ToyConfig& c = model.config;
  const ToyParams& p = model.params;
  const auto seq = static_cast<Eigen::Index>(tokens.size());
  if (seq == 0 || seq > c.max_seq) {
    throw Error("toymodel", ErrorCode::InvalidArgument,
                "token sequence length " + std::to_string(seq) + " outside [1, " + std::to_string(c.max_seq) + "]");
  }
  for (std::size_t i = 0; i < hooks.size(); ++i) {
    if (hooks[i].layer < 0 || hooks[i].layer >= c.n_layers) {
      throw Error("toymodel", ErrorCode::LayerOutOfRange,
                  "hook layer " + std::to_string(hooks[i].layer) + " outside [0, " + std::to_string(c.n_layers) + ")");
    }
    if (hooks[i].mode == HookMode::Intervene && !hooks[i].transform) {
      throw Error("toymodel", ErrorCode::InvalidArgument, "intervene hook without a transform");
    }
  }

  Eigen::MatrixXd x(seq, c.d_model);
  for (Eigen::Index t = 0; t < seq; ++t) {
    const int tok = tokens[static_cast<std::size_t>(t)];
    if (tok < 0 || tok >= c.vocab_size) {
      throw Error("toymodel", ErrorCode::InvalidArgument, "token id " + std::to_string(tok) + " out of vocabulary");
    }
    x.row(t) = p.token_embedding.row(tok) + p.position_embedding.row(t);
  }

  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (cache) cache->blocks.resize(static_cast<std::size_t>(c.n_layers));
  if (result) result->attention.assign(static_cast<std::size_t>(c.n_layers), {});

  for (int l = 0; l < c.n_layers; ++l) {
    const BlockParams& b = p.blocks[static_cast<std::size_t>(l)];
    BlockCache local;
    BlockCache& bc = cache ? cache->blocks[static_cast<std::size_t>(l)] : local;
    bc.input = x;

    bc.h1 = layer_norm(x, b.ln1_gain, b.ln1_bias, &bc.ln1);
    bc.q = (bc.h1 * b.w_query).rowwise() + b.b_query.transpose();
    bc.k = (bc.h1 * b.w_key).rowwise() + b.b_key.transpose();
    bc.v = (bc.h1 * b.w_value).rowwise() + b.b_value.transpose();
    bc.heads.resize(seq, c.d_model);
    bc.probs.assign(static_cast<std::size_t>(c.n_heads), {});
    for (int h = 0; h < c.n_heads; ++h) {
      const auto qh = bc.q.middleCols(h * dh, dh);
      const auto kh = bc.k.middleCols(h * dh, dh);
      Eigen::MatrixXd scores = (qh * kh.transpose()) * scale;
      Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(seq, seq);
      for (Eigen::Index i = 0; i < seq; ++i) {
        const double row_max = scores.row(i).head(i + 1).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          probs(i, j) = std::exp(scores(i, j) - row_max);
          sum += probs(i, j);
        }
        probs.row(i).head(i + 1) /= sum;
      }
      bc.heads.middleCols(h * dh, dh) = probs * bc.v.middleCols(h * dh, dh);
      if (result) result->attention[static_cast<std::size_t>(l)].push_back(probs);
      bc.probs[static_cast<std::size_t>(h)] = std::move(probs);
    }
    bc.mid = x + ((bc.heads * b.w_out).rowwise() + b.b_out.transpose());

    bc.h2 = layer_norm(bc.mid, b.ln2_gain, b.ln2_bias, &bc.ln2);
    bc.up = (bc.h2 * b.w_up).rowwise() + b.b_up.transpose();
    bc.act = bc.up.unaryExpr([](double u) { return gelu(u); });
    x = bc.mid + ((bc.act * b.w_down).rowwise() + b.b_down.transpose());

    for (std::size_t i = 0; i < hooks.size(); ++i) {
      if (hooks[i].layer != l) continue;
      if (hooks[i].mode == HookMode::Capture) {
        if (result) result->captured[i] = x.row(seq - 1).transpose();
      } else {
        const Eigen::VectorXd replaced = hooks[i].transform(x.row(seq - 1).transpose());
        if (replaced.size() != c.d_model) {
          throw Error("toymodel", ErrorCode::DimensionMismatch, "intervene transform changed the state dimension");
        }
        x.row(seq - 1) = replaced.transpose();
      }
    }
  }
  if (cache) cache->final_input = x;
  return x;
}

}  // namespace detail

Eigen::VectorXd readout(const ToyModel& model, const Eigen::VectorXd& state) {
  const Eigen::MatrixXd row = state.transpose();
  const Eigen::MatrixXd normed = detail::layer_norm(row, model.params.final_gain, model.params.final_bias, nullptr);
  return (normed * model.params.unembedding).transpose();
}

ForwardResult forward_with_hooks(const ToyModel& model, std::span<const int> tokens, std::span<const HookSpec> hooks) {
  ForwardResult result;
  const Eigen::MatrixXd x = detail::run_blocks(model, tokens, hooks, nullptr, &result);
  const Eigen::MatrixXd normed = detail::layer_norm(x, model.params.final_gain, model.params.final_bias, nullptr);
  result.logits = normed * model.params.unembedding;
  return result;
}

Generation generate(const ToyModel& model, std::span<const int> prompt, const SteeringPlan* steering, int max_new) {
  if (steering) {
    steering->config.validate();
    if (steering->direction.dim() != model.config.d_model) {
      throw Error("toymodel", ErrorCode::DimensionMismatch, "steering direction does not match d_model");
    }
  }
  Generation gen;
  std::vector<int> context(prompt.begin(), prompt.end());
  for (int step = 0; step < max_new && static_cast<int>(context.size()) <= model.config.max_seq; ++step) {
    std::vector<HookSpec> hooks;
    bool fired = false;
    if (steering && (steering->config.apply_every_step || step == 0)) {
      hooks.push_back(HookSpec::intervene(steering->config.layer, [&](const Eigen::VectorXd& s) {
        fired = gate_fires(s, steering->direction, steering->config);
        return gate_and_steer(s, steering->direction, steering->config);
      }));
    }
    const ForwardResult fwd = forward_with_hooks(model, context, hooks);
    if (fired) ++gen.steered_steps;
    Eigen::Index next = 0;
    fwd.logits.row(fwd.logits.rows() - 1).maxCoeff(&next);
    gen.tokens.push_back(static_cast<int>(next));
    context.push_back(static_cast<int>(next));
    if (next == tokens::kEnd) break;
  }
  return gen;
}

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  const ToyConfig& c = model.config;
  json header = {{"format", "rsteer-toy"},
                 {"version", 1},
                 {"config",
                  {{"vocab_size", c.vocab_size},
                   {"d_model", c.d_model},
                   {"n_layers", c.n_layers},
                   {"n_heads", c.n_heads},
                   {"max_seq", c.max_seq},
                   {"seed", c.seed}}}};
  const std::string text = header.dump();

  std::vector<char> bytes;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put32(static_cast<std::uint32_t>(text.size()));
  bytes.insert(bytes.end(), text.begin(), text.end());
  for (const auto& t : model.params.tensors()) {
    for (double v : t) put32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("toymodel", ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("toymodel", ErrorCode::IoError, "cannot read " + path.string());
  const std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  std::size_t pos = 0;
  auto get32 = [&]() {
    if (bytes.size() - pos < 4) throw Error("toymodel", ErrorCode::MalformedCheckpoint, "checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  };
  const std::uint32_t len = get32();
  if (bytes.size() - pos < len) throw Error("toymodel", ErrorCode::MalformedCheckpoint, "checkpoint header truncated");
  ToyConfig c;
  try {
    const json header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    if (header.at("format") != "rsteer-toy" || header.at("version") != 1) {
      throw Error("toymodel", ErrorCode::MalformedCheckpoint, "not a version 1 toy checkpoint");
    }
    const json& jc = header.at("config");
    c.vocab_size = jc.at("vocab_size");
    c.d_model = jc.at("d_model");
    c.n_layers = jc.at("n_layers");
    c.n_heads = jc.at("n_heads");
    c.max_seq = jc.at("max_seq");
    c.seed = jc.at("seed");
  } catch (const json::exception& e) {
    throw Error("toymodel", ErrorCode::MalformedCheckpoint, std::string("bad checkpoint header: ") + e.what());
  }
  pos += len;
  c.validate();
  ToyModel model{c, ToyParams::zeros(c)};
  if (bytes.size() - pos != 4 * model.params.parameter_count()) {
    throw Error("toymodel", ErrorCode::MalformedCheckpoint, "checkpoint size does not match its config");
  }
  for (auto t : model.params.tensors()) {
    for (double& v : t) v = static_cast<double>(std::bit_cast<float>(get32()));
  }
  return model;
}

}  // namespace rsteer
