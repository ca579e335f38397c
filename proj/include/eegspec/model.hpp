#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eegspec/stft.hpp"

namespace eegspec {

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class Mode { kTrain, kEval };

// Blocks are conv3x3(pad 1, no bias) -> batch norm -> ReLU -> maxpool 2x2.
// The head is flatten -> fc(hidden) -> ReLU -> fc(classes).
struct NetShape {
  std::size_t in_channels = 3;
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::vector<std::size_t> widths = {16, 32, 64, 64};
  std::size_t hidden = 128;
  std::size_t classes = 4;

  std::size_t FlattenWidth() const;
  void Validate() const;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Parameter order: per block "block{i}.conv.weight" [out,in,3,3],
// "block{i}.bn.gamma", "block{i}.bn.beta"; then "head.fc1.weight"
// [hidden,flat], "head.fc1.bias", "head.fc2.weight" [classes,hidden],
// "head.fc2.bias". Running statistics are "block{i}.bn.running_mean" and
// "block{i}.bn.running_var".
struct VggLiteNet {
  NetShape shape;
  std::vector<Tensor> params;
  std::vector<Tensor> bn_running;
  Mode mode = Mode::kTrain;

  std::size_t num_classes() const { return shape.classes; }
  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);

  friend bool operator==(const VggLiteNet&, const VggLiteNet&) = default;
};

// N x C x H x W, row-major.
struct ImageBatch {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  ImageBatch() = default;
  ImageBatch(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, 0.0) {}
  double& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) { return data[((i * c + ch) * h + y) * w + x]; }
};

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, gamma 1, beta 0,
// running mean 0 / var 1. Deterministic in seed.
VggLiteNet InitNet(const NetShape& shape, std::uint64_t seed);
VggLiteNet InitNet(std::size_t classes, std::uint64_t seed);

// Re-initialises only the final fully-connected layer for `classes` outputs.
VggLiteNet ReplaceHead(const VggLiteNet& net, std::size_t classes, std::uint64_t seed);

// Logits, B x classes. In train mode batch statistics are used and the
// running statistics are updated (momentum 0.1, unbiased variance).
RealMatrix Forward(VggLiteNet& net, const ImageBatch& batch);
// Eval-mode forward on an immutable net.
RealMatrix ForwardEval(const VggLiteNet& net, const ImageBatch& batch);

struct CrossEntropy {
  double loss = 0.0;
  RealMatrix dlogits;  // (softmax - onehot) / B
};
CrossEntropy CrossEntropyLoss(const RealMatrix& logits, std::span<const int> labels);

struct Gradients {
  double loss = 0.0;
  RealMatrix logits;
  std::vector<Tensor> grads;  // same order and shapes as params
  // Per-block batch mean and biased variance (train mode only).
  std::vector<std::vector<double>> batch_mean, batch_var;
};

// Exact gradients of the mean cross-entropy under net.mode: batch statistics
// in train mode, running statistics in eval mode. Running statistics are not
// touched.
Gradients Backward(const VggLiteNet& net, const ImageBatch& batch, std::span<const int> labels);

// v = momentum * v + g; p = p - lr * v.
void SgdStep(std::vector<Tensor>& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity, double lr,
             double momentum);
std::vector<Tensor> ZerosLike(const std::vector<Tensor>& tensors);

enum class Selection { kFinalEpoch, kBestVal };

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  Selection selection = Selection::kBestVal;

  void Validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};
using TrainHistory = std::vector<EpochRecord>;

// Non-owning view of labelled network inputs.
struct LabeledImages {
  std::vector<const StackedSpectrogram*> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

ImageBatch MakeBatch(const LabeledImages& set, std::span<const std::size_t> indices);

struct TrainResult {
  VggLiteNet net;
  TrainHistory history;
};

// Seeded reshuffle each epoch; a trailing batch of one example is merged
// into the previous batch. Validation accuracy is measured in eval mode
// after every epoch. The returned net is in eval mode.
TrainResult Train(const VggLiteNet& net, const LabeledImages& train, const LabeledImages& val, const TrainConfig& cfg);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

// Softmax and argmax; ties go to the lowest class index.
Prediction PredictFromLogits(std::span<const double> logits);
std::vector<Prediction> Predict(const VggLiteNet& net, const LabeledImages& set);

// VGL1: magic, u32 classes, u32 block count, u32 widths..., u32 tensor count,
// then per tensor u16 name length, name, u32 rank, u32 dims..., f64 data.
// Parameters come first, then running statistics.
void SaveCheckpoint(const VggLiteNet& net, const std::filesystem::path& path);
VggLiteNet LoadCheckpoint(const std::filesystem::path& path);

// epoch,train_loss,train_acc,val_acc
std::string HistoryToCsv(const TrainHistory& history);

}  // namespace eegspec
