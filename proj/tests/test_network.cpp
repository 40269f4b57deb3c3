#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <skycompass/checkpoint.hpp>
#include <skycompass/network.hpp>

#include "support.hpp"

using namespace skycompass;
using namespace skycompass::network;
using Eigen::MatrixXd;

namespace {

// Three 2x2 branches (4 -> 3 -> 2), fusion 5, eight outputs (j = 45).
NetworkConfig tiny_config(OutputActivation act = OutputActivation::Sigmoid) {
  NetworkConfig c;
  c.grid_rows = 2;
  c.grid_cols = 2;
  c.branch_hidden1 = 3;
  c.branch_hidden2 = 2;
  c.fusion_hidden = 5;
  c.output_size = 8;
  c.output_activation = act;
  return c;
}

MatrixXd random_inputs(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
  return x;
}

MatrixXd exp_targets(int cols, std::mt19937_64& rng) {
  const encoding::EncodingSpec spec{encoding::Scheme::Exp, 45.0, 0.9};
  MatrixXd t(8, cols);
  for (int c = 0; c < cols; ++c) t.col(c) = encoding::encode(encoding::OrientationDeg(45.0 * (rng() % 8)), spec);
  return t;
}

double loss_at(const NetworkParams& p, const NetworkConfig& c, const MatrixXd& x, const MatrixXd& t) {
  return batch_loss(forward(p, c, x).output(), t);
}

// Largest relative deviation between backward() and central differences over every parameter.
double gradient_check(const NetworkConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkParams p = init_params(config, seed);
  // Nonzero biases so their gradients are exercised away from the symmetric point.
  std::normal_distribution<double> n(0.0, 0.3);
  for (Layer& l : p.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
  const MatrixXd x = random_inputs(config.input_size(), 3, rng);
  const MatrixXd t = exp_targets(3, rng);
  const Gradients g = backward(p, config, forward(p, config, x), t);

  constexpr double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss_at(p, config, x, t);
    param = keep - h;
    const double down = loss_at(p, config, x, t);
    param = keep;
    const double numeric = (up - down) / (2.0 * h);
    // Below 1e-5 the difference quotient's own rounding noise (about eps * loss / h) dominates,
    // so tiny entries are held to an absolute 1e-10 instead.
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-5});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  };
  for (std::size_t li = 0; li < kLayerCount; ++li) {
    Layer& l = p.layers[li];
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) probe(l.weight(i), g.layers[li].weight(i));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) probe(l.bias(i), g.layers[li].bias(i));
  }
  return worst;
}

TrainingSet random_training_set(const NetworkConfig& c, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrainingSet s;
  s.inputs = random_inputs(c.input_size(), n, rng);
  for (int i = 0; i < n; ++i) s.headings_deg.push_back(45.0 * (rng() % 8));
  return s;
}

}  // namespace

TEST_CASE("config shaping follows the encoding") {
  const auto exp = NetworkConfig::for_spec({encoding::Scheme::Exp, 1.0, 0.98});
  CHECK(exp.output_size == 360);
  CHECK(exp.output_activation == OutputActivation::Sigmoid);
  const auto raw = NetworkConfig::for_spec({encoding::Scheme::Raw360, 1.0, 0.98});
  CHECK(raw.output_size == 1);
  CHECK(raw.output_activation == OutputActivation::Linear);
  CHECK(NetworkConfig::for_spec({encoding::Scheme::Norm01, 1.0, 0.98}).output_activation ==
        OutputActivation::Sigmoid);
  CHECK(exp.input_size() == 192);
}

TEST_CASE("initialization") {
  const NetworkConfig c;
  const NetworkParams a = init_params(c, 5), b = init_params(c, 5);
  CHECK(a == b);
  CHECK_FALSE(a == init_params(c, 6));
  CHECK(a.matches(c));
  for (const Layer& l : a.layers) {
    CHECK(l.bias.isZero(0.0));
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= limit);
    const double n = static_cast<double>(l.weight.size());
    const double sd = limit / std::sqrt(3.0);
    CHECK(std::fabs(l.weight.mean()) < 3.0 * sd / std::sqrt(n));
    const double var = (l.weight.array() - l.weight.mean()).square().mean();
    CHECK(var == doctest::Approx(sd * sd).epsilon(0.15));
  }
}

TEST_CASE("zero-size layers are rejected") {
  NetworkConfig c;
  c.branch_hidden2 = 0;
  CHECK_THROWS_AS(init_params(c, 1), std::invalid_argument);
  c = NetworkConfig{};
  c.output_size = 0;
  CHECK_THROWS_AS(init_params(c, 1), std::invalid_argument);
}

TEST_CASE("all-zero parameters give 0.5 everywhere") {
  const NetworkConfig c;
  const NetworkParams z = zeros_like(init_params(c, 1));
  std::mt19937_64 rng(1);
  const MatrixXd out = forward(z, c, random_inputs(c.input_size(), 4, rng)).output();
  CHECK(out.rows() == 360);
  CHECK((out.array() == 0.5).all());
}

TEST_CASE("forward rejects shape mismatches") {
  const NetworkConfig c = tiny_config();
  const NetworkParams p = init_params(c, 1);
  CHECK_THROWS_AS(forward(p, c, MatrixXd::Zero(11, 2)), std::invalid_argument);
  NetworkConfig other = c;
  other.fusion_hidden = 6;
  CHECK_THROWS_AS(forward(p, other, MatrixXd::Zero(12, 2)), std::invalid_argument);
  CHECK_THROWS_AS(batch_loss(MatrixXd::Zero(8, 2), MatrixXd::Zero(8, 3)), std::invalid_argument);
}

TEST_CASE("branches only see their own map") {
  const NetworkConfig c = tiny_config();
  const NetworkParams p = init_params(c, 3);
  std::mt19937_64 rng(3);
  MatrixXd x = random_inputs(c.input_size(), 2, rng);
  const ForwardCache before = forward(p, c, x);
  x.middleRows(c.branch_inputs(), c.branch_inputs()).array() += 0.25;  // DOP map only
  const ForwardCache after = forward(p, c, x);
  CHECK(before.activations[kS0Hidden2] == after.activations[kS0Hidden2]);
  CHECK(before.activations[kAopHidden2] == after.activations[kAopHidden2]);
  CHECK_FALSE(before.activations[kDopHidden2] == after.activations[kDopHidden2]);
}

TEST_CASE("batch loss is the mean per-sample squared error") {
  MatrixXd out(2, 2), t = MatrixXd::Zero(2, 2);
  out << 1, 0, 1, 2;
  CHECK(batch_loss(out, t) == doctest::Approx((2.0 + 4.0) / 2.0));
}

TEST_CASE("gradients vanish at the target") {
  const NetworkConfig c = tiny_config();
  const NetworkParams p = init_params(c, 2);
  std::mt19937_64 rng(2);
  const MatrixXd x = random_inputs(c.input_size(), 3, rng);
  const ForwardCache cache = forward(p, c, x);
  const Gradients g = backward(p, c, cache, cache.output());
  for (const Layer& l : g.layers) {
    CHECK(l.weight.isZero(0.0));
    CHECK(l.bias.isZero(0.0));
  }
}

TEST_CASE("linear output gradient scales with the residual") {
  const NetworkConfig c = tiny_config(OutputActivation::Linear);
  const NetworkParams p = init_params(c, 4);
  std::mt19937_64 rng(4);
  const MatrixXd x = random_inputs(c.input_size(), 2, rng);
  const ForwardCache cache = forward(p, c, x);
  const MatrixXd residual = MatrixXd::Constant(8, 2, 0.1);
  const Gradients g1 = backward(p, c, cache, cache.output() - residual);
  const Gradients g3 = backward(p, c, cache, cache.output() - 3.0 * residual);
  for (std::size_t i = 0; i < kLayerCount; ++i)
    CHECK((g3.layers[i].weight - 3.0 * g1.layers[i].weight).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backpropagation matches central finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto act = seed % 2 == 0 ? OutputActivation::Linear : OutputActivation::Sigmoid;
    worst = std::max(worst, gradient_check(tiny_config(act), seed));
  }
  MESSAGE("worst relative deviation " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("training is deterministic and lr 0 leaves parameters untouched") {
  const NetworkConfig c = tiny_config();
  const TrainingSet data = random_training_set(c, 20, 7);
  TrainConfig tc;
  tc.spec = {encoding::Scheme::Exp, 45.0, 0.9};
  tc.epochs = 5;
  tc.batch_size = 6;
  const FitResult a = fit(data, tc, c), b = fit(data, tc, c);
  CHECK(a.params == b.params);
  CHECK(a.report.epoch_loss == b.report.epoch_loss);
  CHECK(a.report.epoch_loss.size() == 5);
  CHECK_FALSE(a.params == init_params(c, tc.seed));

  tc.learning_rate = 0.0;
  const FitResult still = fit(data, tc, c);
  CHECK(still.params == init_params(c, tc.seed));
  for (double l : still.report.epoch_loss) CHECK(l == still.report.epoch_loss.front());

  tc.epochs = 0;
  CHECK(fit(data, tc, c).params == init_params(c, tc.seed));
}

TEST_CASE("fit validates its inputs") {
  const NetworkConfig c = tiny_config();
  TrainConfig tc;
  tc.spec = {encoding::Scheme::Exp, 45.0, 0.9};
  CHECK_THROWS_AS(fit(TrainingSet{}, tc, c), std::invalid_argument);
  const TrainingSet data = random_training_set(c, 4, 1);
  tc.spec.j_deg = 1.0;
  CHECK_THROWS_AS(fit(data, tc, c), std::invalid_argument);
  tc.spec.j_deg = 45.0;
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(fit(data, tc, c), std::invalid_argument);
  tc.learning_rate = 1e-3;
  tc.batch_size = 0;
  CHECK_THROWS_AS(fit(data, tc, c), std::invalid_argument);
}

TEST_CASE("runaway learning rate is reported as divergence") {
  const NetworkConfig c = tiny_config(OutputActivation::Linear);
  TrainingSet data = random_training_set(c, 8, 2);
  for (double& h : data.headings_deg) h = 315.0;
  TrainConfig tc;
  tc.spec = {encoding::Scheme::Exp, 45.0, 0.9};
  tc.learning_rate = 1e200;
  tc.epochs = 50;
  CHECK_THROWS_AS(fit(data, tc, c), DivergenceError);
}

TEST_CASE("validation metrics are attached to the report") {
  const NetworkConfig c = tiny_config();
  const TrainingSet data = random_training_set(c, 8, 3);
  TrainConfig tc;
  tc.spec = {encoding::Scheme::Exp, 45.0, 0.9};
  tc.epochs = 2;
  const FitResult r = fit(data, tc, c, &data);
  REQUIRE(r.report.validation_folded.has_value());
  CHECK(r.report.validation_folded->count == 8);
  CHECK(r.report.validation_folded->mae <= r.report.validation_wrapped->mae);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  Model m{tiny_config(), {encoding::Scheme::Exp, 45.0, 0.9}, polarimg::PipelineConfig{}, init_params(tiny_config(), 9)};
  m.pipeline.channel_pool = 2;
  save_checkpoint(m, dir / "m.ckpt");
  const Model back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.network == m.network);
  CHECK(back.spec == m.spec);
  CHECK(back.pipeline.channel_pool == 2);
  CHECK(back.params == m.params);
  std::mt19937_64 rng(1);
  const MatrixXd x = random_inputs(m.network.input_size(), 4, rng);
  CHECK(forward(back.params, back.network, x).output() == forward(m.params, m.network, x).output());

  save_checkpoint(back, dir / "again.ckpt");
  CHECK(testing::slurp(dir / "m.ckpt") == testing::slurp(dir / "again.ckpt"));
}

TEST_CASE("checkpoint failures carry distinct codes") {
  testing::TempDir dir("ckptbad");
  Model m{tiny_config(), {encoding::Scheme::Exp, 45.0, 0.9}, polarimg::PipelineConfig{}, init_params(tiny_config(), 9)};
  save_checkpoint(m, dir / "m.ckpt");
  const std::string bytes = testing::slurp(dir / "m.ckpt");
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const CheckpointError& e) {
      return e.code();
    }
    FAIL("no CheckpointError thrown");
    return CheckpointErrc::Io;
  };

  CHECK(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == CheckpointErrc::Io);

  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK(code_of([&] { load_checkpoint(dir / "short.ckpt"); }) == CheckpointErrc::Corrupt);

  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
  CHECK(code_of([&] { load_checkpoint(dir / "flip.ckpt"); }) == CheckpointErrc::Corrupt);

  std::string other_version = bytes;
  other_version[8] = 2;
  std::ofstream(dir / "v2.ckpt", std::ios::binary) << other_version;
  CHECK(code_of([&] { load_checkpoint(dir / "v2.ckpt"); }) == CheckpointErrc::VersionMismatch);

  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a model";
  CHECK(code_of([&] { load_checkpoint(dir / "junk.ckpt"); }) == CheckpointErrc::Corrupt);

  // A j = 0.1 model requested by a j = 1 harness.
  NetworkConfig fine = NetworkConfig::for_spec({encoding::Scheme::Exp, 0.1, 0.98}, 2, 2);
  fine.branch_hidden1 = 3;
  fine.branch_hidden2 = 2;
  fine.fusion_hidden = 5;
  Model m01{fine, {encoding::Scheme::Exp, 0.1, 0.98}, polarimg::PipelineConfig{}, init_params(fine, 1)};
  save_checkpoint(m01, dir / "j01.ckpt");
  NetworkConfig coarse = fine;
  coarse.output_size = 360;
  CHECK(code_of([&] { load_checkpoint(dir / "j01.ckpt", coarse, {encoding::Scheme::Exp, 1.0, 0.98}); }) ==
        CheckpointErrc::ShapeMismatch);
  CHECK_NOTHROW(load_checkpoint(dir / "j01.ckpt", fine, m01.spec));
}
