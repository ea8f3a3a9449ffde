#include "slr/nn/train.hpp"

#include "slr/parallel.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace slr::nn {

void TrainConfig::validate() const {
  std::vector<std::string> bad;
  if (epochs < 1) bad.push_back("epochs must be >= 1");
  if (!(learning_rate >= 0)) bad.push_back("learning rate must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) bad.push_back("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0)) bad.push_back("Adam epsilon must be > 0");
  if (batch_size < 1) bad.push_back("batch size must be >= 1");
  if (!bad.empty()) {
    std::string msg = "invalid training config:";
    for (const auto &b : bad) msg += " " + b + ";";
    throw std::invalid_argument(msg);
  }
}

namespace {

std::vector<Var> flat(const ModelVars &v) {
  std::vector<Var> out;
  auto add = [&](const CnnVars &c) {
    for (std::size_t l = 0; l < c.weights.size(); ++l) {
      out.push_back(c.weights[l]);
      out.push_back(c.biases[l]);
    }
  };
  add(v.k);
  if (v.i) add(*v.i);
  return out;
}

}  // namespace

double example_loss(const Example &ex, const UnrolledModel &m, std::vector<RealTensor> *grads) {
  Tape t;
  const ModelVars v = bind(t, m, grads != nullptr);
  const Var out = unrolled_graph(t, ex.kspace, m, v);
  const Var loss = op::mse(t, out, ex.ground_truth);
  const double value = t.real(loss)[0];
  if (grads) {
    t.backward(loss);
    grads->clear();
    for (Var p : flat(v)) grads->push_back(t.real_grad(p));
  }
  return value;
}

void Adam::step(const std::vector<RealTensor *> &params, const std::vector<RealTensor> &grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (auto *p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    RealTensor &p = *params[k];
    const RealTensor &g = grads[k];
    p.check_same(g);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[k][i] = b1_ * m_[k][i] + (1 - b1_) * g[i];
      v_[k][i] = b2_ * v_[k][i] + (1 - b2_) * g[i] * g[i];
      p[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
  }
}

TrainResult train(const std::vector<Example> &data, UnrolledModel model, const TrainConfig &config,
                  const std::function<void(std::size_t, double, const UnrolledModel &)> &on_epoch) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  model.validate(data.front().kspace.data.extent(0));
  const std::size_t threads = config.threads ? config.threads : worker_threads();
  Rng rng(config.seed);
  Adam adam(config.learning_rate, config.beta1, config.beta2, config.adam_epsilon);
  TrainResult res;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<double> per_example(data.size(), 0.0);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<std::vector<RealTensor>> grads(n);
      std::vector<double> losses(n);
      parallel_for(n, threads, [&](std::size_t j) {
        losses[j] = example_loss(data[order[start + j]], model, &grads[j]);
      });
      std::vector<RealTensor> total = grads[0];
      double batch_loss = losses[0];
      per_example[order[start]] = losses[0];
      for (std::size_t j = 1; j < n; ++j) {
        batch_loss += losses[j];
        per_example[order[start + j]] = losses[j];
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += grads[j][k];
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(res.steps) +
                                 (config.checkpoint_dir.empty()
                                      ? std::string()
                                      : "; last finite checkpoint kept at " + config.checkpoint_dir.string()));
      for (auto &g : total) g *= 1.0 / static_cast<double>(n);
      adam.step(parameter_tensors(model), total);
      ++res.steps;
    }
    const double mean = std::accumulate(per_example.begin(), per_example.end(), 0.0) / static_cast<double>(data.size());
    res.epoch_loss.push_back(mean);
    if (!config.checkpoint_dir.empty()) save_checkpoint(config.checkpoint_dir, model, {epoch + 1, mean});
    if (on_epoch) on_epoch(epoch, mean, model);
  }
  res.model = std::move(model);
  return res;
}

}  // namespace slr::nn
