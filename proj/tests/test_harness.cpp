#include <doctest.h>

#include <cmath>
#include <sstream>

#include <skycompass/dataset.hpp>
#include <skycompass/harness.hpp>

using namespace skycompass;
using namespace skycompass::harness;

namespace {

// Small, fast experiment: 4x4 feature grid and narrow layers.
ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.pipeline.channel_pool = 8;
  cfg.network.branch_hidden1 = 8;
  cfg.network.branch_hidden2 = 4;
  cfg.network.fusion_hidden = 16;
  cfg.train.epochs = 3;
  cfg.train.spec = {encoding::Scheme::Exp, 10.0, 0.9};
  return cfg;
}

LabeledSet tiny_set(std::size_t n, std::uint64_t seed, double alt_lo = 5.0, double alt_hi = 60.0) {
  skysim::GenerationConfig g;
  g.count = n;
  g.seed = seed;
  g.sun_altitude_min_deg = alt_lo;
  g.sun_altitude_max_deg = alt_hi;
  std::vector<skysim::Sample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    const skysim::SampleMeta meta = skysim::draw_sample_meta(g, i);
    samples.push_back({meta, skysim::render_sample(meta)});
  }
  return prepare(samples, tiny_experiment().pipeline);
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("summary statistics") {
  const std::vector<double> errors{1.0, 2.0, 3.0};
  const MetricsSummary s = summarize(errors, ErrorMode::Wrapped360);
  CHECK(s.mae == doctest::Approx(2.0));
  CHECK(s.rmse == doctest::Approx(std::sqrt(14.0 / 3.0)));
  CHECK(s.me == 3.0);
  CHECK(s.count == 3);
  CHECK(s.mae <= s.me);
  CHECK(s.rmse <= s.me);

  const MetricsSummary zero = summarize(std::vector<double>{0.0, 0.0}, ErrorMode::Folded180);
  CHECK(zero.mae == 0.0);
  CHECK(zero.rmse == 0.0);
  CHECK(zero.me == 0.0);
  CHECK(summarize({}, ErrorMode::Folded180).count == 0);
}

TEST_CASE("a 180-degree flip counts fully when wrapped and barely when folded") {
  const double e = 178.7693;
  CHECK(summarize(std::vector<double>{e}, ErrorMode::Wrapped360).mae == doctest::Approx(178.7693));
  CHECK(summarize(std::vector<double>{encoding::fold_error_180(e)}, ErrorMode::Folded180).mae ==
        doctest::Approx(1.2307));
}

TEST_CASE("error mode tokens") {
  CHECK(error_mode_from_token("folded") == ErrorMode::Folded180);
  CHECK(error_mode_from_token("wrapped") == ErrorMode::Wrapped360);
  CHECK(to_token(ErrorMode::Folded180) == "folded");
  CHECK_THROWS_AS(error_mode_from_token("both"), std::invalid_argument);
}

TEST_CASE("prepare keeps labels and grid") {
  const LabeledSet s = tiny_set(5, 3);
  CHECK(s.size() == 5);
  CHECK(s.grid_rows == 4);
  CHECK(s.grid_cols == 4);
  CHECK(s.data.inputs.rows() == 48);
  CHECK(s.sample_index == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("evaluation of emitted codes") {
  const LabeledSet test = tiny_set(6, 4);
  const ExperimentConfig cfg = tiny_experiment();
  TrainedModel tm = train_model(test, cfg, cfg.train.spec);
  const Evaluation ev = evaluate(tm.model, test);
  CHECK(ev.predicted_deg.size() == 6);
  CHECK(ev.folded.mae <= ev.wrapped.mae);
  for (double e : ev.wrapped_error_deg) {
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
  }

  // Force the output layer to emit each sample's own code.
  network::Model& m = tm.model;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Eigen::MatrixXd one = test.data.inputs.col(static_cast<Eigen::Index>(i));
    network::Model exact = m;
    exact.params.layers[network::kOutput].weight.setZero();
    const encoding::CodeVector code = encoding::encode(encoding::OrientationDeg(test.data.headings_deg[i]), m.spec);
    exact.params.layers[network::kOutput].bias = (code.array() - 0.5) * 20.0;
    LabeledSet single = test;
    single.data.inputs = one;
    single.data.headings_deg = {test.data.headings_deg[i]};
    single.sun_altitude_deg = {test.sun_altitude_deg[i]};
    single.sample_index = {i};
    const Evaluation e = evaluate(exact, single);
    // With j = 10 the best possible answer is the nearest grid neuron.
    const double grid = encoding::nearest_neuron(encoding::OrientationDeg(test.data.headings_deg[i]), m.spec) * 10.0;
    CHECK(e.predicted_deg.at(0) == grid);
    CHECK(e.wrapped.me == doctest::Approx(std::fabs(grid - test.data.headings_deg[i])));
    CHECK(e.wrapped.me <= 5.0);
  }
}

TEST_CASE("ambiguity analysis") {
  const LabeledSet test = tiny_set(8, 5);
  const ExperimentConfig cfg = tiny_experiment();
  const TrainedModel tm = train_model(test, cfg, cfg.train.spec);

  LabeledSet empty = test;
  empty.data.inputs.resize(test.data.inputs.rows(), 0);
  empty.data.headings_deg.clear();
  empty.sun_altitude_deg.clear();
  empty.sample_index.clear();
  const AmbiguityReport none = ambiguity_analysis(tm.model, empty);
  CHECK(none.n180e == 0);
  CHECK_FALSE(none.msa_deg.has_value());
  CHECK(line_count(ambiguity_csv(none)) == 1);

  // A window covering every possible error selects every sample.
  const AmbiguityReport all = ambiguity_analysis(tm.model, test, 0.0, 180.0);
  CHECK(all.n180e == 8);
  CHECK(*all.msa_deg == doctest::Approx(*std::max_element(test.sun_altitude_deg.begin(), test.sun_altitude_deg.end())));
  CHECK(first_line(ambiguity_csv(all)) == "index,truth_deg,pred_deg,solar_alt_deg,error_deg");
  CHECK(line_count(ambiguity_csv(all)) == 9);
}

TEST_CASE("encoding comparison") {
  const LabeledSet train = tiny_set(10, 6), test = tiny_set(4, 7);
  ExperimentConfig cfg = tiny_experiment();
  const std::vector<encoding::Scheme> schemes{encoding::Scheme::Exp, encoding::Scheme::Trig, encoding::Scheme::OneHot};
  const auto rows = compare_encodings(train, test, schemes, cfg);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rows[i].scheme == schemes[i]);
    CHECK_FALSE(rows[i].diverged);
    CHECK(std::isfinite(rows[i].evaluation.folded.mae));
  }
  const std::string csv = comparison_csv(rows, ErrorMode::Folded180);
  CHECK(first_line(csv) == "scheme,mae_deg,rmse_deg,me_deg,mode");
  CHECK(line_count(csv) == 4);
  CHECK(csv.find("\ntrig,") != std::string::npos);

  cfg.threads = 3;
  CHECK(comparison_csv(compare_encodings(train, test, schemes, cfg), ErrorMode::Folded180) == csv);

  const auto single = compare_encodings(train, test, {encoding::Scheme::Exp}, cfg);
  CHECK(line_count(comparison_csv(single, ErrorMode::Wrapped360)) == 2);
}

TEST_CASE("m sweep") {
  const LabeledSet train = tiny_set(10, 8), test = tiny_set(4, 9);
  const ExperimentConfig cfg = tiny_experiment();
  const SweepResult r = sweep_m(train, test, {0.95, 0.96, 0.97, 0.98, 0.99}, cfg);
  CHECK(r.rows.size() == 5);
  for (const SweepRow& row : r.rows) {
    CHECK(std::isfinite(row.summary.mae));
    CHECK(std::isfinite(row.summary.rmse));
  }
  REQUIRE(r.argmin_mae_m.has_value());
  const std::string csv = sweep_csv(r);
  CHECK(first_line(csv) == "m,mae_deg,rmse_deg");
  CHECK(line_count(csv) == 6);

  // A one-point sweep is a plain training run and evaluation.
  ExperimentConfig one = cfg;
  one.train.spec.m = 0.98;
  const SweepResult single = sweep_m(train, test, {0.98}, cfg);
  const Evaluation ev = evaluate(train_model(train, one, one.train.spec).model, test);
  CHECK(single.rows.at(0).summary.mae == ev.folded.mae);
  CHECK(*single.argmin_mae_m == 0.98);

  CHECK_THROWS_AS(sweep_m(train, test, {1.0}, cfg), std::invalid_argument);
}

TEST_CASE("CSV writers") {
  CHECK(format_number(1.5) == "1.500000");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(plot_csv({1.0, 2.0}, {3.0, 4.0}) == "x,y\n1.000000,3.000000\n2.000000,4.000000\n");
  CHECK_THROWS_AS(plot_csv({1.0}, {}), std::invalid_argument);
  network::TrainReport rep;
  rep.epoch_loss = {0.5, 0.25};
  CHECK(loss_csv(rep) == "epoch,mean_loss\n1,0.5\n2,0.25\n");

  Evaluation ev;
  ev.wrapped = summarize(std::vector<double>{178.0}, ErrorMode::Wrapped360);
  ev.folded = summarize(std::vector<double>{2.0}, ErrorMode::Folded180);
  CHECK(metrics_csv(encoding::Scheme::Exp, ev, {ErrorMode::Wrapped360, ErrorMode::Folded180}) ==
        "scheme,mae_deg,rmse_deg,me_deg,mode\n"
        "exp,178.000000,178.000000,178.000000,wrapped\n"
        "exp,2.000000,2.000000,2.000000,folded\n");
}
