#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "slr/nn/model.hpp"

namespace slr::nn {

struct Example {
  std::string id;
  acq::MultiChannelKSpace kspace;
  ComplexTensor ground_truth;  // M x H x W coil images
};

struct TrainConfig {
  std::size_t epochs = 1;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty = no checkpoints
  std::size_t threads = 0;               // 0 = worker_threads()

  void validate() const;
};

struct TrainResult {
  UnrolledModel model;
  std::vector<double> epoch_loss;  // mean example loss seen during each epoch
  std::size_t steps = 0;
};

/// Loss of one example and, if grads is non-null, its parameter gradients in
/// parameter_tensors() order.
double example_loss(const Example &ex, const UnrolledModel &m, std::vector<RealTensor> *grads);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(const std::vector<RealTensor *> &params, const std::vector<RealTensor> &grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<RealTensor> m_, v_;
};

/// Adam on mean per-example MSE with shuffled mini-batches. Batch gradients are
/// reduced in example order, so results do not depend on the thread count.
/// On a non-finite loss throws std::runtime_error; the last checkpoint written
/// (end of the previous epoch) stays on disk.
TrainResult train(const std::vector<Example> &data, UnrolledModel model, const TrainConfig &config,
                  const std::function<void(std::size_t epoch, double loss, const UnrolledModel &model)> &on_epoch = nullptr);

}  // namespace slr::nn
