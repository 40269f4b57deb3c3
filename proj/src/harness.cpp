#include <skycompass/harness.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace skycompass::harness {

std::string_view to_token(ErrorMode mode) { return mode == ErrorMode::Folded180 ? "folded" : "wrapped"; }

ErrorMode error_mode_from_token(std::string_view token) {
  if (token == "folded") return ErrorMode::Folded180;
  if (token == "wrapped") return ErrorMode::Wrapped360;
  throw std::invalid_argument("unknown error mode '" + std::string(token) + "'");
}

MetricsSummary summarize(std::span<const double> errors, ErrorMode mode) {
  MetricsSummary s;
  s.mode = mode;
  s.count = errors.size();
  if (errors.empty()) return s;
  double sum = 0.0, sq = 0.0, mx = 0.0;
  for (double e : errors) {
    const double a = std::fabs(e);
    sum += a;
    sq += a * a;
    mx = std::max(mx, a);
  }
  s.mae = sum / static_cast<double>(errors.size());
  s.rmse = std::sqrt(sq / static_cast<double>(errors.size()));
  s.me = mx;
  return s;
}

LabeledSet prepare(const std::vector<skysim::Sample>& samples, const polarimg::PipelineConfig& pipeline) {
  std::vector<polarimg::FeatureTensor> features;
  std::vector<double> headings;
  LabeledSet set;
  features.reserve(samples.size());
  for (const auto& s : samples) {
    features.push_back(polarimg::extract_features(s.mosaic, pipeline));
    headings.push_back(s.meta.heading_deg);
    set.sun_altitude_deg.push_back(s.meta.sun.altitude_deg);
    set.sample_index.push_back(s.meta.index);
  }
  if (!features.empty()) {
    set.grid_rows = features.front().grid_rows;
    set.grid_cols = features.front().grid_cols;
  }
  set.data = network::make_training_set(features, std::move(headings));
  return set;
}

Evaluation evaluate(const network::Model& model, const LabeledSet& test) {
  Evaluation ev;
  std::vector<double> folded;
  if (test.size() > 0) {
    const Eigen::MatrixXd out = network::forward(model.params, model.network, test.data.inputs).output();
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto pred = encoding::decode(out.col(static_cast<Eigen::Index>(i)), model.spec);
      const double e = encoding::angular_error(pred, encoding::OrientationDeg(test.data.headings_deg[i]));
      ev.predicted_deg.push_back(pred.value());
      ev.wrapped_error_deg.push_back(e);
      folded.push_back(encoding::fold_error_180(e));
    }
  }
  ev.wrapped = summarize(ev.wrapped_error_deg, ErrorMode::Wrapped360);
  ev.folded = summarize(folded, ErrorMode::Folded180);
  return ev;
}

TrainedModel train_model(const LabeledSet& train, const ExperimentConfig& config, const encoding::EncodingSpec& spec) {
  network::NetworkConfig net = config.network;
  net.grid_rows = train.grid_rows;
  net.grid_cols = train.grid_cols;
  const network::NetworkConfig shaped = network::NetworkConfig::for_spec(spec, net.grid_rows, net.grid_cols);
  net.output_size = shaped.output_size;
  net.output_activation = shaped.output_activation;

  network::TrainConfig tc = config.train;
  tc.spec = spec;
  network::FitResult fit = network::fit(train.data, tc, net);
  return {{net, spec, config.pipeline, std::move(fit.params)}, std::move(fit.report)};
}

namespace {

// Runs job(i) for i in [0, n) on up to `threads` workers.
template <typename Job>
void run_parallel(std::size_t n, unsigned threads, Job&& job) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(std::max(1u, threads), n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ComparisonRow> compare_encodings(const LabeledSet& train, const LabeledSet& test,
                                             const std::vector<encoding::Scheme>& schemes,
                                             const ExperimentConfig& config) {
  std::vector<ComparisonRow> rows(schemes.size());
  run_parallel(schemes.size(), config.threads, [&](std::size_t i) {
    encoding::EncodingSpec spec = config.train.spec;
    spec.scheme = schemes[i];
    rows[i].scheme = schemes[i];
    try {
      const TrainedModel tm = train_model(train, config, spec);
      rows[i].evaluation = evaluate(tm.model, test);
    } catch (const network::DivergenceError& e) {
      rows[i].diverged = true;
      rows[i].note = e.what();
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rows[i].evaluation.wrapped = {nan, nan, nan, test.size(), ErrorMode::Wrapped360};
      rows[i].evaluation.folded = {nan, nan, nan, test.size(), ErrorMode::Folded180};
    }
  });
  return rows;
}

AmbiguityReport ambiguity_analysis(const network::Model& model, const LabeledSet& test, double lo, double hi) {
  AmbiguityReport r;
  r.window_lo_deg = lo;
  r.window_hi_deg = hi;
  const Evaluation ev = evaluate(model, test);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double e = ev.wrapped_error_deg[i];
    if (e < lo || e > hi) continue;
    r.rows.push_back({test.sample_index[i], test.data.headings_deg[i], ev.predicted_deg[i], test.sun_altitude_deg[i], e});
    r.msa_deg = std::max(r.msa_deg.value_or(-90.0), test.sun_altitude_deg[i]);
  }
  r.n180e = r.rows.size();
  return r;
}

SweepResult sweep_m(const LabeledSet& train, const LabeledSet& test, const std::vector<double>& m_values,
                    const ExperimentConfig& config, ErrorMode mode) {
  for (double m : m_values)
    if (!(m > 0.0 && m < 1.0)) throw std::invalid_argument("sweep_m: every m must lie in (0, 1)");

  SweepResult result;
  result.rows.resize(m_values.size());
  run_parallel(m_values.size(), config.threads, [&](std::size_t i) {
    encoding::EncodingSpec spec = config.train.spec;
    spec.scheme = encoding::Scheme::Exp;
    spec.m = m_values[i];
    SweepRow& row = result.rows[i];
    row.m = m_values[i];
    try {
      const Evaluation ev = evaluate(train_model(train, config, spec).model, test);
      row.summary = mode == ErrorMode::Folded180 ? ev.folded : ev.wrapped;
    } catch (const network::DivergenceError&) {
      row.diverged = true;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.summary = {nan, nan, nan, test.size(), mode};
    }
  });

  const SweepRow* best_mae = nullptr;
  const SweepRow* best_rmse = nullptr;
  for (const SweepRow& row : result.rows) {
    if (row.diverged) continue;
    if (!best_mae || row.summary.mae < best_mae->summary.mae) best_mae = &row;
    if (!best_rmse || row.summary.rmse < best_rmse->summary.rmse) best_rmse = &row;
  }
  if (best_mae) result.argmin_mae_m = best_mae->m;
  if (best_rmse) result.argmin_rmse_m = best_rmse->m;
  return result;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

void metrics_row(std::ostringstream& out, encoding::Scheme scheme, const MetricsSummary& s) {
  out << encoding::to_token(scheme) << ',' << format_number(s.mae) << ',' << format_number(s.rmse) << ','
      << format_number(s.me) << ',' << to_token(s.mode) << '\n';
}

}  // namespace

std::string comparison_csv(const std::vector<ComparisonRow>& rows, ErrorMode mode) {
  std::ostringstream out;
  out << "scheme,mae_deg,rmse_deg,me_deg,mode\n";
  for (const auto& r : rows)
    metrics_row(out, r.scheme, mode == ErrorMode::Folded180 ? r.evaluation.folded : r.evaluation.wrapped);
  return out.str();
}

std::string metrics_csv(encoding::Scheme scheme, const Evaluation& ev, std::vector<ErrorMode> modes) {
  std::ostringstream out;
  out << "scheme,mae_deg,rmse_deg,me_deg,mode\n";
  for (ErrorMode m : modes) metrics_row(out, scheme, m == ErrorMode::Folded180 ? ev.folded : ev.wrapped);
  return out.str();
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "m,mae_deg,rmse_deg\n";
  for (const auto& r : result.rows)
    out << format_number(r.m) << ',' << format_number(r.summary.mae) << ',' << format_number(r.summary.rmse) << '\n';
  return out.str();
}

std::string ambiguity_csv(const AmbiguityReport& report) {
  std::ostringstream out;
  out << "index,truth_deg,pred_deg,solar_alt_deg,error_deg\n";
  for (const auto& r : report.rows)
    out << r.index << ',' << format_number(r.truth_deg) << ',' << format_number(r.predicted_deg) << ','
        << format_number(r.solar_altitude_deg) << ',' << format_number(r.error_deg) << '\n';
  return out.str();
}

std::string plot_csv(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("plot_csv: x and y differ in length");
  std::ostringstream out;
  out << "x,y\n";
  for (std::size_t i = 0; i < x.size(); ++i) out << format_number(x[i]) << ',' << format_number(y[i]) << '\n';
  return out.str();
}

std::string loss_csv(const network::TrainReport& report) {
  std::ostringstream out;
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", report.epoch_loss[i]);
    out << (i + 1) << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace skycompass::harness
