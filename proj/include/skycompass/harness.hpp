#pragma once

#include <optional>
#include <string>
#include <vector>

#include <skycompass/dataset.hpp>
#include <skycompass/encoding.hpp>
#include <skycompass/metrics.hpp>
#include <skycompass/network.hpp>

/// Desk-scale experiment protocol: encoding comparison, 180-degree ambiguity
/// analysis and the exponential-base sweep.
namespace skycompass::harness {

/// Feature tensors plus the metadata the experiments need.
struct LabeledSet {
  network::TrainingSet data;
  std::vector<double> sun_altitude_deg;
  std::vector<std::size_t> sample_index;
  int grid_rows = 0;
  int grid_cols = 0;

  std::size_t size() const { return data.size(); }
};

LabeledSet prepare(const std::vector<skysim::Sample>& samples, const polarimg::PipelineConfig& pipeline);

struct Evaluation {
  MetricsSummary wrapped;
  MetricsSummary folded;
  std::vector<double> predicted_deg;
  std::vector<double> wrapped_error_deg;
};

Evaluation evaluate(const network::Model& model, const LabeledSet& test);

/// Shared budget for every training run of an experiment. The encoding in
/// `train.spec` provides j (and m) for each run; hidden sizes come from
/// `network`, the feature grid from the training set.
struct ExperimentConfig {
  network::TrainConfig train;
  network::NetworkConfig network;
  polarimg::PipelineConfig pipeline;
  unsigned threads = 1;
};

struct TrainedModel {
  network::Model model;
  network::TrainReport report;
};

/// Trains one model for `spec`; DivergenceError propagates.
TrainedModel train_model(const LabeledSet& train, const ExperimentConfig& config, const encoding::EncodingSpec& spec);

struct ComparisonRow {
  encoding::Scheme scheme = encoding::Scheme::Exp;
  bool diverged = false;
  std::string note;
  Evaluation evaluation;
};

std::vector<ComparisonRow> compare_encodings(const LabeledSet& train, const LabeledSet& test,
                                             const std::vector<encoding::Scheme>& schemes,
                                             const ExperimentConfig& config);

struct AmbiguityRow {
  std::size_t index = 0;
  double truth_deg = 0.0;
  double predicted_deg = 0.0;
  double solar_altitude_deg = 0.0;
  double error_deg = 0.0;
};

struct AmbiguityReport {
  std::size_t n180e = 0;
  std::optional<double> msa_deg;  // empty when no sample falls in the window
  double window_lo_deg = 170.0;
  double window_hi_deg = 190.0;
  std::vector<AmbiguityRow> rows;
};

AmbiguityReport ambiguity_analysis(const network::Model& model, const LabeledSet& test, double window_lo_deg = 170.0,
                                   double window_hi_deg = 190.0);

struct SweepRow {
  double m = 0.0;
  bool diverged = false;
  MetricsSummary summary;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> argmin_mae_m;
  std::optional<double> argmin_rmse_m;
};

SweepResult sweep_m(const LabeledSet& train, const LabeledSet& test, const std::vector<double>& m_values,
                    const ExperimentConfig& config, ErrorMode mode = ErrorMode::Folded180);

/// `scheme,mae_deg,rmse_deg,me_deg,mode`
std::string comparison_csv(const std::vector<ComparisonRow>& rows, ErrorMode mode);
std::string metrics_csv(encoding::Scheme scheme, const Evaluation& evaluation, std::vector<ErrorMode> modes);
/// `m,mae_deg,rmse_deg`
std::string sweep_csv(const SweepResult& result);
/// `index,truth_deg,pred_deg,solar_alt_deg,error_deg`
std::string ambiguity_csv(const AmbiguityReport& report);
/// `x,y`
std::string plot_csv(const std::vector<double>& x, const std::vector<double>& y);
/// `epoch,mean_loss`
std::string loss_csv(const network::TrainReport& report);

std::string format_number(double v);

}  // namespace skycompass::harness
