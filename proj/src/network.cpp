#include <skycompass/network.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace skycompass::network {

using Eigen::MatrixXd;
using Eigen::VectorXd;

NetworkConfig NetworkConfig::for_spec(const encoding::EncodingSpec& spec, int grid_rows, int grid_cols) {
  spec.validate();
  NetworkConfig c;
  c.grid_rows = grid_rows;
  c.grid_cols = grid_cols;
  c.output_size = spec.size();
  c.output_activation = spec.scheme == encoding::Scheme::Raw360 ? OutputActivation::Linear
                                                                : OutputActivation::Sigmoid;
  return c;
}

void NetworkConfig::validate() const {
  if (grid_rows <= 0 || grid_cols <= 0 || branch_hidden1 <= 0 || branch_hidden2 <= 0 || fusion_hidden <= 0 ||
      output_size <= 0)
    throw std::invalid_argument("network config: every layer size must be positive");
}

namespace {

// (out, in) of every layer in LayerIndex order.
std::array<std::array<int, 2>, kLayerCount> layer_shapes(const NetworkConfig& c) {
  const int g = c.branch_inputs();
  std::array<std::array<int, 2>, kLayerCount> s{};
  for (LayerIndex first : kBranchFirst) {
    s[first] = {c.branch_hidden1, g};
    s[first + 1] = {c.branch_hidden2, c.branch_hidden1};
  }
  s[kFusion1] = {c.fusion_hidden, 3 * c.branch_hidden2};
  s[kFusion2] = {c.fusion_hidden, c.fusion_hidden};
  s[kOutput] = {c.output_size, c.fusion_hidden};
  return s;
}

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

MatrixXd affine(const Layer& l, const MatrixXd& x) { return (l.weight * x).colwise() + l.bias; }

}  // namespace

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool NetworkParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const Layer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

bool NetworkParams::matches(const NetworkConfig& config) const {
  const auto shapes = layer_shapes(config);
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const Layer& l = layers[i];
    if (l.weight.rows() != shapes[i][0] || l.weight.cols() != shapes[i][1] || l.bias.size() != shapes[i][0])
      return false;
  }
  return true;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const Layer& a = layers[i];
    const Layer& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.bias.size() != b.bias.size())
      return false;
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  NetworkParams p;
  const auto shapes = layer_shapes(config);
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    const auto [out, in] = shapes[i];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer& l = p.layers[i];
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);  // row-major draw order
    l.bias = VectorXd::Zero(out);
  }
  return p;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams z;
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    z.layers[i].weight = MatrixXd::Zero(params.layers[i].weight.rows(), params.layers[i].weight.cols());
    z.layers[i].bias = VectorXd::Zero(params.layers[i].bias.size());
  }
  return z;
}

VectorXd to_input(const polarimg::FeatureTensor& feature) {
  return Eigen::Map<const VectorXd>(feature.values.data(), static_cast<Eigen::Index>(feature.values.size()));
}

MatrixXd to_inputs(const std::vector<polarimg::FeatureTensor>& features) {
  if (features.empty()) return {};
  MatrixXd x(static_cast<Eigen::Index>(features.front().values.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].values.size() != features.front().values.size())
      throw std::invalid_argument("to_inputs: feature tensors differ in size");
    x.col(static_cast<Eigen::Index>(i)) = to_input(features[i]);
  }
  return x;
}

ForwardCache forward(const NetworkParams& params, const NetworkConfig& config, const MatrixXd& inputs) {
  if (!params.matches(config)) throw std::invalid_argument("forward: parameters do not match config");
  if (inputs.rows() != config.input_size())
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                std::to_string(config.input_size()));

  const auto& L = params.layers;
  const int g = config.branch_inputs();
  const int h2 = config.branch_hidden2;
  ForwardCache cache;
  cache.input = inputs;
  auto& a = cache.activations;

  MatrixXd fused(3 * h2, inputs.cols());
  for (int b = 0; b < 3; ++b) {
    const LayerIndex first = kBranchFirst[b];
    a[first] = sigmoid(affine(L[first], inputs.middleRows(b * g, g)));
    a[first + 1] = sigmoid(affine(L[first + 1], a[first]));
    fused.middleRows(b * h2, h2) = a[first + 1];
  }
  a[kFusion1] = sigmoid(affine(L[kFusion1], fused));
  a[kFusion2] = sigmoid(affine(L[kFusion2], a[kFusion1]));
  a[kOutput] = affine(L[kOutput], a[kFusion2]);
  if (config.output_activation == OutputActivation::Sigmoid) a[kOutput] = sigmoid(a[kOutput]);
  return cache;
}

encoding::CodeVector forward(const NetworkParams& params, const NetworkConfig& config,
                             const polarimg::FeatureTensor& feature) {
  return forward(params, config, MatrixXd(to_input(feature))).output().col(0);
}

double batch_loss(const MatrixXd& outputs, const MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw std::invalid_argument("batch_loss: shape mismatch");
  if (outputs.cols() == 0) return 0.0;
  return (outputs - targets).squaredNorm() / static_cast<double>(outputs.cols());
}

namespace {

// delta = upstream * s'(z) for a sigmoid activation s.
MatrixXd sigmoid_delta(const MatrixXd& upstream, const MatrixXd& activation) {
  return (upstream.array() * activation.array() * (1.0 - activation.array())).matrix();
}

void accumulate(Layer& grad, const MatrixXd& delta, const MatrixXd& layer_input) {
  grad.weight.noalias() = delta * layer_input.transpose();
  grad.bias = delta.rowwise().sum();
}

}  // namespace

Gradients backward(const NetworkParams& params, const NetworkConfig& config, const ForwardCache& cache,
                   const MatrixXd& targets) {
  const auto& a = cache.activations;
  if (targets.rows() != a[kOutput].rows() || targets.cols() != a[kOutput].cols())
    throw std::invalid_argument("backward: target shape does not match forward output");

  const auto& L = params.layers;
  const int g = config.branch_inputs();
  const int h2 = config.branch_hidden2;
  const double scale = 2.0 / static_cast<double>(targets.cols());
  Gradients grad;

  MatrixXd delta = scale * (a[kOutput] - targets);
  if (config.output_activation == OutputActivation::Sigmoid) delta = sigmoid_delta(delta, a[kOutput]);
  accumulate(grad.layers[kOutput], delta, a[kFusion2]);

  delta = sigmoid_delta(L[kOutput].weight.transpose() * delta, a[kFusion2]);
  accumulate(grad.layers[kFusion2], delta, a[kFusion1]);

  delta = sigmoid_delta(L[kFusion2].weight.transpose() * delta, a[kFusion1]);
  MatrixXd fused(3 * h2, cache.input.cols());
  for (int b = 0; b < 3; ++b) fused.middleRows(b * h2, h2) = a[kBranchFirst[b] + 1];
  accumulate(grad.layers[kFusion1], delta, fused);

  const MatrixXd fused_upstream = L[kFusion1].weight.transpose() * delta;
  for (int b = 0; b < 3; ++b) {
    const LayerIndex first = kBranchFirst[b];
    MatrixXd d2 = sigmoid_delta(fused_upstream.middleRows(b * h2, h2), a[first + 1]);
    accumulate(grad.layers[first + 1], d2, a[first]);
    MatrixXd d1 = sigmoid_delta(L[first + 1].weight.transpose() * d2, a[first]);
    accumulate(grad.layers[first], d1, cache.input.middleRows(b * g, g));
  }
  return grad;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning rate must be finite and non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  spec.validate();
}

TrainingSet make_training_set(const std::vector<polarimg::FeatureTensor>& features,
                              std::vector<double> headings_deg) {
  if (features.size() != headings_deg.size())
    throw std::invalid_argument("make_training_set: feature and label counts differ");
  return {to_inputs(features), std::move(headings_deg)};
}

namespace {

MatrixXd encode_targets(const TrainingSet& data, const encoding::EncodingSpec& spec) {
  MatrixXd t(spec.size(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    t.col(static_cast<Eigen::Index>(i)) = encoding::encode(encoding::OrientationDeg(data.headings_deg[i]), spec);
  return t;
}

class Adam {
 public:
  Adam(const NetworkParams& like, const TrainConfig& cfg) : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {}

  void step(NetworkParams& params, const Gradients& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < kLayerCount; ++i) {
      update(params.layers[i].weight, grad.layers[i].weight, m_.layers[i].weight, v_.layers[i].weight, c1, c2);
      update(params.layers[i].bias, grad.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias, c1, c2);
    }
  }

 private:
  template <typename T>
  void update(T& p, const T& g, T& m, T& v, double c1, double c2) const {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
    p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }

  TrainConfig cfg_;
  NetworkParams m_, v_;
  int t_ = 0;
};

std::pair<harness::MetricsSummary, harness::MetricsSummary> validate_model(const NetworkParams& params,
                                                                          const NetworkConfig& config,
                                                                          const encoding::EncodingSpec& spec,
                                                                          const TrainingSet& data) {
  const MatrixXd out = forward(params, config, data.inputs).output();
  std::vector<double> wrapped, folded;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = encoding::decode(out.col(static_cast<Eigen::Index>(i)), spec);
    const double e = encoding::angular_error(pred, encoding::OrientationDeg(data.headings_deg[i]));
    wrapped.push_back(e);
    folded.push_back(encoding::fold_error_180(e));
  }
  return {harness::summarize(wrapped, harness::ErrorMode::Wrapped360),
          harness::summarize(folded, harness::ErrorMode::Folded180)};
}

}  // namespace

FitResult fit(const TrainingSet& data, const TrainConfig& train, const NetworkConfig& config,
              const TrainingSet* validation) {
  train.validate();
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("fit: empty training set");
  if (config.output_size != train.spec.size())
    throw std::invalid_argument("fit: network output size does not match the encoding");
  if (data.inputs.rows() != config.input_size()) throw std::invalid_argument("fit: feature size mismatch");

  const MatrixXd targets = encode_targets(data, train.spec);
  FitResult result{init_params(config, train.seed), {}};
  Adam adam(result.params, train);
  std::mt19937_64 shuffle_rng(train.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n = static_cast<Eigen::Index>(data.size());

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (Eigen::Index begin = 0; begin < n; begin += train.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(train.batch_size, n - begin);
      MatrixXd x(data.inputs.rows(), count), t(targets.rows(), count);
      for (Eigen::Index c = 0; c < count; ++c) {
        x.col(c) = data.inputs.col(order[static_cast<std::size_t>(begin + c)]);
        t.col(c) = targets.col(order[static_cast<std::size_t>(begin + c)]);
      }
      const ForwardCache cache = forward(result.params, config, x);
      loss_sum += batch_loss(cache.output(), t) * static_cast<double>(count);
      adam.step(result.params, backward(result.params, config, cache, t));
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    result.report.epoch_loss.push_back(mean_loss);
    result.report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (!std::isfinite(mean_loss) || !result.params.all_finite())
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch + 1), result.report);
  }

  if (validation != nullptr && validation->size() > 0) {
    auto [w, f] = validate_model(result.params, config, train.spec, *validation);
    result.report.validation_wrapped = w;
    result.report.validation_folded = f;
  }
  return result;
}

encoding::OrientationDeg predict_features(const Model& model, const polarimg::FeatureTensor& feature) {
  if (feature.grid_rows != model.network.grid_rows || feature.grid_cols != model.network.grid_cols)
    throw std::invalid_argument("predict: feature grid " + std::to_string(feature.grid_rows) + "x" +
                                std::to_string(feature.grid_cols) + " does not match the model");
  return encoding::decode(forward(model.params, model.network, feature), model.spec);
}

encoding::OrientationDeg predict_orientation(const Model& model, const MosaicImage& mosaic) {
  return predict_features(model, polarimg::extract_features(mosaic, model.pipeline));
}

}  // namespace skycompass::network
