#include <cmath>

#include "rsteer/error.hpp"
#include "rsteer/rng.hpp"
#include "rsteer/toy_model.hpp"
#include "toy_internal.hpp"

namespace rsteer {
namespace {

/// Softmax cross-entropy of the last-position logits; returns the loss and
/// writes d(loss)/d(logits) into `dlogits`.
double cross_entropy(const Eigen::VectorXd& logits, int target, Eigen::VectorXd& dlogits) {
  const double max = logits.maxCoeff();
  const Eigen::ArrayXd e = (logits.array() - max).exp();
  const double z = e.sum();
  dlogits = (e / z).matrix();
  dlogits[target] -= 1.0;
  return -(logits[target] - max - std::log(z));
}

/// Backpropagates d(loss)/d(final residual) through all blocks into `grad`.
void backward_blocks(const ToyModel& model, std::span<const int> tokens, const detail::ForwardCache& cache,
                     Eigen::MatrixXd dx, ToyParams& grad) {
  const ToyConfig& c = model.config;
  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index seq = dx.rows();

  for (int l = c.n_layers - 1; l >= 0; --l) {
    const BlockParams& b = model.params.blocks[static_cast<std::size_t>(l)];
    BlockParams& g = grad.blocks[static_cast<std::size_t>(l)];
    const detail::BlockCache& bc = cache.blocks[static_cast<std::size_t>(l)];

    // MLP branch: x = mid + gelu(ln2(mid) W_up + b_up) W_down + b_down
    g.w_down.noalias() += bc.act.transpose() * dx;
    g.b_down += dx.colwise().sum().transpose();
    Eigen::MatrixXd dup = dx * b.w_down.transpose();
    dup.array() *= bc.up.unaryExpr([](double u) { return detail::gelu_derivative(u); }).array();
    g.w_up.noalias() += bc.h2.transpose() * dup;
    g.b_up += dup.colwise().sum().transpose();
    const Eigen::MatrixXd dh2 = dup * b.w_up.transpose();
    Eigen::MatrixXd dmid = dx + detail::layer_norm_backward(dh2, bc.ln2, b.ln2_gain, g.ln2_gain, g.ln2_bias);

    // Attention branch: mid = input + heads W_out + b_out
    g.w_out.noalias() += bc.heads.transpose() * dmid;
    g.b_out += dmid.colwise().sum().transpose();
    const Eigen::MatrixXd dheads = dmid * b.w_out.transpose();
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(seq, c.d_model);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(seq, c.d_model);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(seq, c.d_model);
    for (int h = 0; h < c.n_heads; ++h) {
      const Eigen::MatrixXd& probs = bc.probs[static_cast<std::size_t>(h)];
      const auto dout = dheads.middleCols(h * dh, dh);
      const Eigen::MatrixXd dprobs = dout * bc.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = probs.transpose() * dout;
      const Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
      const Eigen::MatrixXd dscores = (probs.array() * (dprobs.colwise() - row_dot).array()).matrix() * scale;
      dq.middleCols(h * dh, dh) = dscores * bc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = dscores.transpose() * bc.q.middleCols(h * dh, dh);
    }
    g.w_query.noalias() += bc.h1.transpose() * dq;
    g.w_key.noalias() += bc.h1.transpose() * dk;
    g.w_value.noalias() += bc.h1.transpose() * dv;
    g.b_query += dq.colwise().sum().transpose();
    g.b_key += dk.colwise().sum().transpose();
    g.b_value += dv.colwise().sum().transpose();
    const Eigen::MatrixXd dh1 = dq * b.w_query.transpose() + dk * b.w_key.transpose() + dv * b.w_value.transpose();
    dx = dmid + detail::layer_norm_backward(dh1, bc.ln1, b.ln1_gain, g.ln1_gain, g.ln1_bias);
  }

  for (Eigen::Index t = 0; t < seq; ++t) {
    grad.token_embedding.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    grad.position_embedding.row(t) += dx.row(t);
  }
}

}  // namespace

std::pair<double, ToyParams> loss_and_gradient(const ToyModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw Error("toymodel", ErrorCode::InvalidArgument, "empty training batch");
  ToyParams grad = ToyParams::zeros(model.config);
  double total = 0.0;
  for (const Example& ex : batch) {
    detail::ForwardCache cache;
    const Eigen::MatrixXd x = detail::run_blocks(model, ex.tokens, {}, &cache, nullptr);
    const Eigen::Index last = x.rows() - 1;

    detail::LayerNormCache lnf;
    const Eigen::MatrixXd normed =
        detail::layer_norm(x.row(last), model.params.final_gain, model.params.final_bias, &lnf);
    const Eigen::VectorXd logits = (normed * model.params.unembedding).transpose();
    Eigen::VectorXd dlogits;
    total += cross_entropy(logits, ex.target, dlogits);

    grad.unembedding.noalias() += normed.transpose() * dlogits.transpose();
    const Eigen::MatrixXd dnormed = dlogits.transpose() * model.params.unembedding.transpose();
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    dx.row(last) =
        detail::layer_norm_backward(dnormed, lnf, model.params.final_gain, grad.final_gain, grad.final_bias);
    backward_blocks(model, ex.tokens, cache, std::move(dx), grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (auto t : grad.tensors()) {
    for (double& v : t) v *= inv_n;
  }
  return {total * inv_n, std::move(grad)};
}

double loss(const ToyModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw Error("toymodel", ErrorCode::InvalidArgument, "empty batch");
  double total = 0.0;
  for (const Example& ex : batch) {
    const ForwardResult fwd = forward_with_hooks(model, ex.tokens);
    Eigen::VectorXd dlogits;
    total += cross_entropy(fwd.logits.row(fwd.logits.rows() - 1).transpose(), ex.target, dlogits);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<Example> training_examples(const RoleFactWorld& world, bool held_out) {
  std::vector<Example> out;
  for (const auto& p : world.prompts) {
    if (p.held_out == held_out) out.push_back({world.prompt_tokens(p), p.target()});
  }
  return out;
}

TrainResult train_toy(const ToyConfig& config, const RoleFactWorld& world, const TrainOptions& options) {
  config.validate(world.vocab_required());
  if (options.steps < 0 || options.batch_size < 1 || !(options.learning_rate > 0.0)) {
    throw Error("toymodel", ErrorCode::InvalidArgument, "steps >= 0, batch_size >= 1 and lr > 0 required");
  }
  TrainResult result{ToyModel::initialize(config), 0.0};
  const std::vector<Example> data = training_examples(world, false);
  if (data.empty()) throw Error("toymodel", ErrorCode::InvalidArgument, "world has no training prompts");

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ToyParams m = ToyParams::zeros(config);
  ToyParams v = ToyParams::zeros(config);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  // Decay applies to matrices (embeddings, projections), not to gains or biases.
  std::vector<bool> decays;
  for (const auto& name : result.model.params.tensor_names()) {
    decays.push_back(name.find("gain") == std::string::npos && name.find("bias") == std::string::npos &&
                     name.find(".b_") == std::string::npos);
  }

  std::vector<Example> batch(static_cast<std::size_t>(options.batch_size));
  for (int step = 1; step <= options.steps; ++step) {
    for (auto& ex : batch) ex = data[rng.below(data.size())];
    auto [batch_loss, grad] = loss_and_gradient(result.model, batch);
    if (!std::isfinite(batch_loss)) {
      throw Error("toymodel", ErrorCode::Divergence, "training loss became non-finite at step " + std::to_string(step));
    }
    result.final_loss = batch_loss;

    const double bc1 = 1.0 - std::pow(kBeta1, step);
    const double bc2 = 1.0 - std::pow(kBeta2, step);
    auto params = result.model.params.tensors();
    auto grads = grad.tensors();
    auto ms = m.tensors();
    auto vs = v.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t i = 0; i < params[t].size(); ++i) {
        const double gi = grads[t][i];
        ms[t][i] = kBeta1 * ms[t][i] + (1.0 - kBeta1) * gi;
        vs[t][i] = kBeta2 * vs[t][i] + (1.0 - kBeta2) * gi * gi;
        params[t][i] -= options.learning_rate * ((ms[t][i] / bc1) / (std::sqrt(vs[t][i] / bc2) + kEps) +
                                                 (decays[t] ? options.weight_decay * params[t][i] : 0.0));
      }
    }
  }

  for (auto t : result.model.params.tensors()) {
    for (double& x : t) x = static_cast<double>(static_cast<float>(x));
  }
  result.final_loss = loss(result.model, data);
  if (!std::isfinite(result.final_loss)) throw Error("toymodel", ErrorCode::Divergence, "final loss is non-finite");
  return result;
}

}  // namespace rsteer
