#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include <skycompass/encoding.hpp>
#include <skycompass/metrics.hpp>
#include <skycompass/mosaic.hpp>
#include <skycompass/polarimg.hpp>

/// Trainable part of the orientation network: three locally connected sigmoid
/// branches (S0, DOP, AOP), two globally connected sigmoid fusion layers and
/// the encoding output layer.
namespace skycompass::network {

enum class OutputActivation : std::uint32_t { Sigmoid = 0, Linear = 1 };

struct NetworkConfig {
  int grid_rows = 8;
  int grid_cols = 8;
  int branch_hidden1 = 128;
  int branch_hidden2 = 64;
  int fusion_hidden = 256;
  int output_size = 360;
  OutputActivation output_activation = OutputActivation::Sigmoid;

  /// Output width and activation matched to `spec`; linear output only for raw360.
  static NetworkConfig for_spec(const encoding::EncodingSpec& spec, int grid_rows = 8, int grid_cols = 8);

  void validate() const;
  int branch_inputs() const { return grid_rows * grid_cols; }
  int input_size() const { return polarimg::kFeatureMaps * branch_inputs(); }

  bool operator==(const NetworkConfig&) const = default;
};

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Fixed layer order; the checkpoint layout follows it.
enum LayerIndex : std::size_t {
  kS0Hidden1,
  kS0Hidden2,
  kDopHidden1,
  kDopHidden2,
  kAopHidden1,
  kAopHidden2,
  kFusion1,
  kFusion2,
  kOutput,
  kLayerCount
};

inline constexpr LayerIndex kBranchFirst[3] = {kS0Hidden1, kDopHidden1, kAopHidden1};

struct NetworkParams {
  std::array<Layer, kLayerCount> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
  bool matches(const NetworkConfig& config) const;
  bool operator==(const NetworkParams& other) const;
};

using Gradients = NetworkParams;

/// Glorot-uniform weights, zero biases. Throws std::invalid_argument on a degenerate config.
NetworkParams init_params(const NetworkConfig& config, std::uint64_t seed);
NetworkParams zeros_like(const NetworkParams& params);

/// One feature tensor as a column; several as a matrix with one column per sample.
Eigen::VectorXd to_input(const polarimg::FeatureTensor& feature);
Eigen::MatrixXd to_inputs(const std::vector<polarimg::FeatureTensor>& features);

struct ForwardCache {
  Eigen::MatrixXd input;
  std::array<Eigen::MatrixXd, kLayerCount> activations;

  const Eigen::MatrixXd& output() const { return activations[kOutput]; }
};

/// Batched forward pass; throws std::invalid_argument on a shape mismatch.
ForwardCache forward(const NetworkParams& params, const NetworkConfig& config, const Eigen::MatrixXd& inputs);
encoding::CodeVector forward(const NetworkParams& params, const NetworkConfig& config,
                             const polarimg::FeatureTensor& feature);

/// Mean over batch columns of the per-sample squared-error loss.
double batch_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets);

/// Gradient of batch_loss with respect to every parameter.
Gradients backward(const NetworkParams& params, const NetworkConfig& config, const ForwardCache& cache,
                   const Eigen::MatrixXd& targets);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 60;
  std::uint64_t seed = 1;
  encoding::EncodingSpec spec;

  void validate() const;
};

struct TrainingSet {
  Eigen::MatrixXd inputs;             // one column per sample
  std::vector<double> headings_deg;   // ground truth per column

  std::size_t size() const { return headings_deg.size(); }
};

TrainingSet make_training_set(const std::vector<polarimg::FeatureTensor>& features,
                              std::vector<double> headings_deg);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;
  std::optional<harness::MetricsSummary> validation_wrapped;
  std::optional<harness::MetricsSummary> validation_folded;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, TrainReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

struct FitResult {
  NetworkParams params;
  TrainReport report;
};

/// Mini-batch Adam on the squared-error loss with per-epoch seeded shuffling.
/// Throws DivergenceError as soon as an epoch's mean loss is non-finite.
FitResult fit(const TrainingSet& data, const TrainConfig& train, const NetworkConfig& config,
              const TrainingSet* validation = nullptr);

/// Everything needed to turn a raw frame into a heading.
struct Model {
  NetworkConfig network;
  encoding::EncodingSpec spec;
  polarimg::PipelineConfig pipeline;
  NetworkParams params;
};

encoding::OrientationDeg predict_features(const Model& model, const polarimg::FeatureTensor& feature);
encoding::OrientationDeg predict_orientation(const Model& model, const MosaicImage& mosaic);

}  // namespace skycompass::network
