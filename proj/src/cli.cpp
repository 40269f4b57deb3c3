#include <skycompass/cli.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <skycompass/checkpoint.hpp>
#include <skycompass/dataset.hpp>
#include <skycompass/harness.hpp>
#include <skycompass/pgm.hpp>
#include <skycompass/polarimg.hpp>

namespace skycompass::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

PolarizerPattern parse_pattern(const std::string& text) {
  const auto items = split_list(text);
  if (items.size() != 4) throw UsageError("--pattern needs four comma-separated angles");
  PolarizerPattern p;
  for (std::size_t i = 0; i < 4; ++i) p.angles_deg[i] = std::stoi(items[i]);
  p.validate();
  return p;
}

std::string pattern_text(const PolarizerPattern& p) {
  return std::to_string(p.angles_deg[0]) + "," + std::to_string(p.angles_deg[1]) + "," +
         std::to_string(p.angles_deg[2]) + "," + std::to_string(p.angles_deg[3]);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw RuntimeFailure("cannot write " + path.string());
}

std::vector<skysim::Sample> load_samples(const fs::path& dir) {
  try {
    return skysim::load_dataset(dir);
  } catch (const std::exception& e) {
    throw UsageError(std::string("cannot load dataset: ") + e.what());
  }
}

network::Model load_model(const fs::path& path) {
  try {
    return network::load_checkpoint(path);
  } catch (const network::CheckpointError& e) {
    if (e.code() == network::CheckpointErrc::Io) throw UsageError(e.what());
    throw RuntimeFailure(e.what());
  }
}

/// Replay record written next to every output.
struct RunManifest {
  json doc;

  RunManifest(const std::string& subcommand, const std::vector<std::string>& args) {
    doc["tool"] = "skycompass";
    doc["tool_version"] = kToolVersion;
    doc["subcommand"] = subcommand;
    doc["argv"] = args;
  }

  void write(const fs::path& path) const { write_text(path, doc.dump(2) + "\n"); }
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// Flags shared by every command that trains.
struct TrainFlags {
  std::string scheme = "exp";
  double j = 1.0;
  double m = 0.98;
  int epochs = 60;
  int batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  int branch1 = 128;
  int branch2 = 64;
  int fusion = 256;
  int channel_pool = 4;
  int feature_pool = 1;
  unsigned threads = 1;

  void add_to(CLI::App& app, bool with_scheme) {
    if (with_scheme) app.add_option("--scheme", scheme, "raw360|norm01|onehot|trig|exp")->capture_default_str();
    app.add_option("--j", j, "degrees per output neuron")->capture_default_str();
    app.add_option("--m", m, "exponential encoding base")->capture_default_str();
    app.add_option("--epochs", epochs)->capture_default_str();
    app.add_option("--batch", batch)->capture_default_str();
    app.add_option("--lr", lr)->capture_default_str();
    app.add_option("--beta1", beta1)->capture_default_str();
    app.add_option("--beta2", beta2)->capture_default_str();
    app.add_option("--eps", eps)->capture_default_str();
    app.add_option("--seed", seed)->capture_default_str();
    app.add_option("--branch1", branch1, "first branch layer width")->capture_default_str();
    app.add_option("--branch2", branch2, "second branch layer width")->capture_default_str();
    app.add_option("--fusion", fusion, "fusion layer width")->capture_default_str();
    app.add_option("--channel-pool", channel_pool)->capture_default_str();
    app.add_option("--feature-pool", feature_pool)->capture_default_str();
    app.add_option("--threads", threads, "parallel training runs")->capture_default_str();
  }

  harness::ExperimentConfig experiment() const {
    harness::ExperimentConfig c;
    c.train.learning_rate = lr;
    c.train.beta1 = beta1;
    c.train.beta2 = beta2;
    c.train.epsilon = eps;
    c.train.batch_size = batch;
    c.train.epochs = epochs;
    c.train.seed = seed;
    c.network.branch_hidden1 = branch1;
    c.network.branch_hidden2 = branch2;
    c.network.fusion_hidden = fusion;
    c.pipeline = {channel_pool, feature_pool};
    c.threads = threads;
    try {
      c.train.spec = {encoding::scheme_from_token(scheme), j, m};
      c.train.validate();
      c.pipeline.validate();
      network::NetworkConfig probe = c.network;
      probe.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  json snapshot() const {
    return {{"scheme", scheme}, {"j", j},         {"m", m},         {"epochs", epochs},
            {"batch", batch},   {"lr", lr},       {"beta1", beta1}, {"beta2", beta2},
            {"eps", eps},       {"seed", seed},   {"branch1", branch1}, {"branch2", branch2},
            {"fusion", fusion}, {"channel_pool", channel_pool}, {"feature_pool", feature_pool}};
  }
};

harness::LabeledSet prepare_set(const fs::path& dir, const polarimg::PipelineConfig& pipeline) {
  const auto samples = load_samples(dir);
  if (samples.empty()) throw UsageError("dataset " + dir.string() + " is empty");
  try {
    return harness::prepare(samples, pipeline);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---- gen -------------------------------------------------------------------

struct GenCommand {
  skysim::GenerationConfig cfg;
  std::string out;
  std::string pattern = "90,45,135,0";

  void add(CLI::App& app) {
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--count", cfg.count)->capture_default_str();
    app.add_option("--seed", cfg.seed)->capture_default_str();
    app.add_option("--width", cfg.width)->capture_default_str();
    app.add_option("--height", cfg.height)->capture_default_str();
    app.add_option("--fov", cfg.fov_deg)->capture_default_str();
    app.add_option("--dop-max", cfg.dop_max)->capture_default_str();
    app.add_option("--noise", cfg.noise_sigma, "noise std as a fraction of full scale")->capture_default_str();
    app.add_option("--bit-depth", cfg.bit_depth)->capture_default_str();
    app.add_option("--pattern", pattern, "analyzer angles at offsets (0,0),(0,1),(1,0),(1,1)")->capture_default_str();
    app.add_option("--heading-step", cfg.heading_step_deg, "0 for continuous headings")->capture_default_str();
    app.add_option("--sun-az-min", cfg.sun_azimuth_min_deg)->capture_default_str();
    app.add_option("--sun-az-max", cfg.sun_azimuth_max_deg)->capture_default_str();
    app.add_option("--sun-alt-min", cfg.sun_altitude_min_deg)->capture_default_str();
    app.add_option("--sun-alt-max", cfg.sun_altitude_max_deg)->capture_default_str();
    app.add_option("--threads", cfg.threads)->capture_default_str();
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream) {
    try {
      cfg.pattern = parse_pattern(pattern);
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto manifest = skysim::generate_dataset(cfg, out);
    RunManifest run("gen", args);
    run.doc["config"] = {{"count", cfg.count},
                         {"seed", cfg.seed},
                         {"width", cfg.width},
                         {"height", cfg.height},
                         {"fov_deg", cfg.fov_deg},
                         {"dop_max", cfg.dop_max},
                         {"noise_sigma", cfg.noise_sigma},
                         {"bit_depth", cfg.bit_depth},
                         {"pattern", pattern_text(cfg.pattern)},
                         {"heading_step_deg", cfg.heading_step_deg},
                         {"sun_azimuth_deg", {cfg.sun_azimuth_min_deg, cfg.sun_azimuth_max_deg}},
                         {"sun_altitude_deg", {cfg.sun_altitude_min_deg, cfg.sun_altitude_max_deg}}};
    run.doc["outputs"] = {out};
    run.write(fs::path(out) / "run_manifest.json");
    out_stream << "wrote " << manifest.basenames.size() << " samples to " << out << "\n";
    return kOk;
  }
};

// ---- train -----------------------------------------------------------------

struct TrainCommand {
  TrainFlags flags;
  std::string data, out, loss_csv, val_data;

  void add(CLI::App& app) {
    app.add_option("--data", data, "training dataset directory")->required();
    app.add_option("--out", out, "checkpoint path")->required();
    app.add_option("--loss-csv", loss_csv, "per-epoch loss CSV (default <out>.loss.csv)");
    app.add_option("--val-data", val_data, "optional validation dataset");
    flags.add_to(app, true);
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream) {
    harness::ExperimentConfig exp = flags.experiment();
    const harness::LabeledSet train = prepare_set(data, exp.pipeline);
    exp.network.grid_rows = train.grid_rows;
    exp.network.grid_cols = train.grid_cols;
    std::optional<harness::LabeledSet> val;
    if (!val_data.empty()) val = prepare_set(val_data, exp.pipeline);

    network::NetworkConfig net = exp.network;
    const auto shaped = network::NetworkConfig::for_spec(exp.train.spec, net.grid_rows, net.grid_cols);
    net.output_size = shaped.output_size;
    net.output_activation = shaped.output_activation;

    const fs::path loss_path = loss_csv.empty() ? with_suffix(out, ".loss.csv") : fs::path(loss_csv);
    network::FitResult fit;
    try {
      fit = network::fit(train.data, exp.train, net, val ? &val->data : nullptr);
    } catch (const network::DivergenceError& e) {
      write_text(loss_path, harness::loss_csv(e.report()));
      throw RuntimeFailure(e.what());
    }
    const network::Model model{net, exp.train.spec, exp.pipeline, fit.params};
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    network::save_checkpoint(model, out);
    write_text(loss_path, harness::loss_csv(fit.report));

    std::ostringstream timing;
    timing << "epoch,seconds\n";
    for (std::size_t i = 0; i < fit.report.epoch_seconds.size(); ++i)
      timing << (i + 1) << ',' << harness::format_number(fit.report.epoch_seconds[i]) << '\n';
    write_text(with_suffix(loss_path, ".timing"), timing.str());

    RunManifest run("train", args);
    run.doc["config"] = flags.snapshot();
    run.doc["inputs"] = {data};
    run.doc["outputs"] = {out, loss_path.string()};
    if (fit.report.validation_folded)
      run.doc["validation"] = {{"folded_mae_deg", fit.report.validation_folded->mae},
                               {"wrapped_mae_deg", fit.report.validation_wrapped->mae}};
    run.write(with_suffix(out, ".run.json"));

    out_stream << "trained " << to_token(exp.train.spec.scheme) << " for " << exp.train.epochs
               << " epochs; final loss "
               << (fit.report.epoch_loss.empty() ? std::string("n/a")
                                                 : harness::format_number(fit.report.epoch_loss.back()))
               << "\n";
    return kOk;
  }
};

// Optional expectations a caller can place on a checkpoint.
struct ExpectFlags {
  std::string scheme;
  double j = 0.0;

  void add_to(CLI::App& app) {
    app.add_option("--expect-scheme", scheme, "fail with exit 3 unless the checkpoint uses this scheme");
    app.add_option("--expect-j", j, "fail with exit 3 unless the checkpoint uses this resolution");
  }

  void check(const network::Model& model) const {
    encoding::Scheme expected{};
    if (!scheme.empty()) {
      try {
        expected = encoding::scheme_from_token(scheme);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      if (expected != model.spec.scheme)
        throw RuntimeFailure("checkpoint uses scheme " + std::string(to_token(model.spec.scheme)) + ", expected " + scheme);
    }
    if (j > 0.0 && std::fabs(j - model.spec.j_deg) > 1e-12)
      throw RuntimeFailure("checkpoint uses j=" + std::to_string(model.spec.j_deg) + ", expected j=" + std::to_string(j));
  }
};

harness::LabeledSet prepare_for_model(const std::string& dir, const network::Model& model) {
  harness::LabeledSet set = prepare_set(dir, model.pipeline);
  if (set.data.inputs.rows() != model.network.input_size())
    throw RuntimeFailure("dataset feature size " + std::to_string(set.data.inputs.rows()) +
                         " does not match the checkpoint (" + std::to_string(model.network.input_size()) + ")");
  return set;
}

// ---- eval ------------------------------------------------------------------

struct EvalCommand {
  std::string model_path, data, mode = "both", out, ambiguity_out, plot_out;
  double window_lo = 170.0, window_hi = 190.0;
  ExpectFlags expect;

  void add(CLI::App& app) {
    app.add_option("--model", model_path, "checkpoint")->required();
    app.add_option("--data", data, "test dataset directory")->required();
    app.add_option("--mode", mode, "folded|wrapped|both")->capture_default_str();
    app.add_option("--out", out, "metrics CSV (default stdout)");
    app.add_option("--ambiguity-out", ambiguity_out, "per-sample 180-degree error CSV");
    app.add_option("--window-lo", window_lo)->capture_default_str();
    app.add_option("--window-hi", window_hi)->capture_default_str();
    app.add_option("--plot-out", plot_out, "x,y plot data: truth vs wrapped error");
    expect.add_to(app);
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream) {
    std::vector<harness::ErrorMode> modes;
    if (mode == "both")
      modes = {harness::ErrorMode::Wrapped360, harness::ErrorMode::Folded180};
    else
      try {
        modes = {harness::error_mode_from_token(mode)};
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    const network::Model model = load_model(model_path);
    expect.check(model);
    const harness::LabeledSet test = prepare_for_model(data, model);
    const harness::Evaluation ev = harness::evaluate(model, test);
    const std::string csv = harness::metrics_csv(model.spec.scheme, ev, modes);

    RunManifest run("eval", args);
    run.doc["inputs"] = {model_path, data};
    if (out.empty()) {
      out_stream << csv;
    } else {
      write_text(out, csv);
      run.doc["outputs"].push_back(out);
    }
    if (!ambiguity_out.empty()) {
      const auto report = harness::ambiguity_analysis(model, test, window_lo, window_hi);
      write_text(ambiguity_out, harness::ambiguity_csv(report));
      run.doc["outputs"].push_back(ambiguity_out);
      run.doc["ambiguity"] = {{"n180e", report.n180e},
                              {"msa_deg", report.msa_deg ? json(*report.msa_deg) : json(nullptr)}};
    }
    if (!plot_out.empty()) {
      write_text(plot_out, harness::plot_csv(test.data.headings_deg, ev.wrapped_error_deg));
      run.doc["outputs"].push_back(plot_out);
    }
    if (!out.empty()) run.write(with_suffix(out, ".run.json"));
    return kOk;
  }
};

// ---- predict ---------------------------------------------------------------

struct PredictCommand {
  std::string model_path, image, sidecar, pattern;
  int bit_depth = 0;
  ExpectFlags expect;

  void add(CLI::App& app) {
    app.add_option("--model", model_path, "checkpoint")->required();
    app.add_option("--image", image, "mosaic PGM")->required();
    app.add_option("--sidecar", sidecar, "sample JSON (default: image path with .json)");
    app.add_option("--bit-depth", bit_depth, "override when no sidecar is present");
    app.add_option("--pattern", pattern, "override when no sidecar is present");
    expect.add_to(app);
  }

  int run(const std::vector<std::string>&, std::ostream& out_stream) {
    const network::Model model = load_model(model_path);
    expect.check(model);
    const MosaicImage mosaic = read_mosaic(image, sidecar, bit_depth, pattern);
    encoding::OrientationDeg heading;
    try {
      heading = network::predict_orientation(model, mosaic);
    } catch (const std::invalid_argument& e) {
      throw RuntimeFailure(e.what());
    }
    out_stream << harness::format_number(heading.value()) << "\n";
    return kOk;
  }

  static MosaicImage read_mosaic(const std::string& image, std::string sidecar, int bit_depth,
                                 const std::string& pattern) {
    try {
      int depth = 12;
      PolarizerPattern pat;
      if (sidecar.empty()) {
        const fs::path guess = fs::path(image).replace_extension(".json");
        if (fs::exists(guess)) sidecar = guess.string();
      }
      if (!sidecar.empty()) {
        std::ifstream in(sidecar);
        std::stringstream ss;
        ss << in.rdbuf();
        const skysim::SampleMeta meta = skysim::meta_from_json(ss.str());
        depth = meta.bit_depth;
        pat = meta.pattern;
      }
      if (bit_depth > 0) depth = bit_depth;
      if (!pattern.empty()) pat = parse_pattern(pattern);
      return skysim::mosaic_from_pgm(image, depth, pat);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(std::string("cannot read mosaic: ") + e.what());
    }
  }
};

// ---- compare ---------------------------------------------------------------

struct CompareCommand {
  TrainFlags flags;
  std::string train, test, schemes = "raw360,norm01,onehot,trig,exp", mode = "folded", out, plot_dir;

  void add(CLI::App& app) {
    app.add_option("--train", train, "training dataset directory")->required();
    app.add_option("--test", test, "test dataset directory")->required();
    app.add_option("--schemes", schemes)->capture_default_str();
    app.add_option("--mode", mode, "folded|wrapped")->capture_default_str();
    app.add_option("--out", out, "comparison CSV (default stdout)");
    app.add_option("--plot-dir", plot_dir, "per-scheme x,y plot data (truth vs error)");
    flags.add_to(app, false);
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream) {
    harness::ExperimentConfig exp = flags.experiment();
    harness::ErrorMode err_mode{};
    std::vector<encoding::Scheme> list;
    try {
      err_mode = harness::error_mode_from_token(mode);
      for (const auto& token : split_list(schemes)) list.push_back(encoding::scheme_from_token(token));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (list.empty()) throw UsageError("--schemes is empty");
    const harness::LabeledSet train_set = prepare_set(train, exp.pipeline);
    const harness::LabeledSet test_set = prepare_set(test, exp.pipeline);
    const auto rows = harness::compare_encodings(train_set, test_set, list, exp);
    const std::string csv = harness::comparison_csv(rows, err_mode);

    RunManifest run("compare", args);
    run.doc["config"] = flags.snapshot();
    run.doc["inputs"] = {train, test};
    if (!plot_dir.empty()) {
      for (const auto& r : rows) {
        std::vector<double> errors;
        for (double e : r.evaluation.wrapped_error_deg)
          errors.push_back(err_mode == harness::ErrorMode::Folded180 ? encoding::fold_error_180(e) : e);
        const fs::path p = fs::path(plot_dir) / ("compare_" + std::string(to_token(r.scheme)) + ".csv");
        write_text(p, harness::plot_csv(r.diverged ? std::vector<double>{} : test_set.data.headings_deg, errors));
        run.doc["outputs"].push_back(p.string());
      }
    }
    for (const auto& r : rows)
      if (r.diverged) run.doc["diverged"].push_back({{"scheme", to_token(r.scheme)}, {"note", r.note}});
    if (out.empty()) {
      out_stream << csv;
    } else {
      write_text(out, csv);
      run.doc["outputs"].push_back(out);
      run.write(with_suffix(out, ".run.json"));
    }
    return kOk;
  }
};

// ---- sweep -----------------------------------------------------------------

struct SweepCommand {
  TrainFlags flags;
  std::string train, test, m_list = "0.95,0.96,0.97,0.98,0.99", mode = "folded", out, plot_dir;

  void add(CLI::App& app) {
    app.add_option("--train", train, "training dataset directory")->required();
    app.add_option("--test", test, "test dataset directory")->required();
    app.add_option("--m-list", m_list)->capture_default_str();
    app.add_option("--mode", mode, "folded|wrapped")->capture_default_str();
    app.add_option("--out", out, "sweep CSV (default stdout)");
    app.add_option("--plot-dir", plot_dir, "x,y plot data for the MAE and RMSE panels");
    flags.add_to(app, false);
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream& err_stream) {
    harness::ExperimentConfig exp = flags.experiment();
    exp.train.spec.scheme = encoding::Scheme::Exp;
    std::vector<double> ms;
    harness::ErrorMode err_mode{};
    try {
      err_mode = harness::error_mode_from_token(mode);
      for (const auto& token : split_list(m_list)) ms.push_back(std::stod(token));
    } catch (const std::exception& e) {
      throw UsageError(std::string("bad sweep arguments: ") + e.what());
    }
    if (ms.empty()) throw UsageError("--m-list is empty");
    for (double m : ms)
      if (!(m > 0.0 && m < 1.0)) throw UsageError("every m must lie in (0, 1)");
    const harness::LabeledSet train_set = prepare_set(train, exp.pipeline);
    const harness::LabeledSet test_set = prepare_set(test, exp.pipeline);
    const auto result = harness::sweep_m(train_set, test_set, ms, exp, err_mode);
    const std::string csv = harness::sweep_csv(result);

    RunManifest run("sweep", args);
    run.doc["config"] = flags.snapshot();
    run.doc["inputs"] = {train, test};
    if (!plot_dir.empty()) {
      std::vector<double> x, mae, rmse;
      for (const auto& r : result.rows) {
        x.push_back(r.m);
        mae.push_back(r.summary.mae);
        rmse.push_back(r.summary.rmse);
      }
      write_text(fs::path(plot_dir) / "sweep_mae.csv", harness::plot_csv(x, mae));
      write_text(fs::path(plot_dir) / "sweep_rmse.csv", harness::plot_csv(x, rmse));
    }
    const auto opt = [](const std::optional<double>& v) { return v ? harness::format_number(*v) : std::string("none"); };
    err_stream << "argmin_mae_m=" << opt(result.argmin_mae_m) << " argmin_rmse_m=" << opt(result.argmin_rmse_m) << "\n";
    run.doc["argmin_mae_m"] = result.argmin_mae_m ? json(*result.argmin_mae_m) : json(nullptr);
    run.doc["argmin_rmse_m"] = result.argmin_rmse_m ? json(*result.argmin_rmse_m) : json(nullptr);
    if (out.empty()) {
      out_stream << csv;
    } else {
      write_text(out, csv);
      run.doc["outputs"].push_back(out);
      run.write(with_suffix(out, ".run.json"));
    }
    return kOk;
  }
};

// ---- convert ---------------------------------------------------------------

struct ConvertCommand {
  std::string image, out, sidecar, pattern;
  int bit_depth = 0;
  int pool = 1;

  void add(CLI::App& app) {
    app.add_option("--image", image, "mosaic PGM")->required();
    app.add_option("--out", out, "output prefix; writes <out>_s0.pgm, <out>_dop.pgm, <out>_aop.pgm")->required();
    app.add_option("--sidecar", sidecar);
    app.add_option("--bit-depth", bit_depth);
    app.add_option("--pattern", pattern);
    app.add_option("--pool", pool, "mean-pool size applied to the channels")->capture_default_str();
  }

  int run(const std::vector<std::string>& args, std::ostream& out_stream) {
    if (pool <= 0) throw UsageError("--pool must be positive");
    const MosaicImage mosaic = PredictCommand::read_mosaic(image, sidecar, bit_depth, pattern);
    const auto s = polarimg::stokes(polarimg::mean_pool(polarimg::demosaic(mosaic), pool));
    const auto p = polarimg::polarization(s);

    const auto emit = [&](const std::string& name, const Map& unit) {
      pgm::Graymap g{static_cast<int>(unit.cols()), static_cast<int>(unit.rows()), 65535, {}};
      for (Eigen::Index r = 0; r < unit.rows(); ++r)
        for (Eigen::Index c = 0; c < unit.cols(); ++c)
          g.samples.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(unit(r, c), 0.0, 1.0) * 65535.0)));
      const fs::path path = out + "_" + name + ".pgm";
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      pgm::write(path, g);
      return path.string();
    };
    RunManifest run("convert", args);
    run.doc["outputs"] = {emit("s0", s.s0 / polarimg::kS0Max), emit("dop", p.dop), emit("aop", (p.aop + 90.0) / 180.0)};
    run.write(out + ".run.json");
    out_stream << "wrote " << s.s0.cols() << "x" << s.s0.rows() << " maps with prefix " << out << "\n";
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Polarized-skylight orientation network: simulation, training and evaluation", "skycompass"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenCommand gen;
  TrainCommand train;
  EvalCommand eval;
  PredictCommand predict;
  CompareCommand compare;
  SweepCommand sweep;
  ConvertCommand convert;
  auto* gen_app = app.add_subcommand("gen", "generate a synthetic dataset");
  auto* train_app = app.add_subcommand("train", "train a network on a dataset");
  auto* eval_app = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  auto* predict_app = app.add_subcommand("predict", "predict the heading of one mosaic");
  auto* compare_app = app.add_subcommand("compare", "train and compare output encodings");
  auto* sweep_app = app.add_subcommand("sweep", "sweep the exponential encoding base m");
  auto* convert_app = app.add_subcommand("convert", "write S0/DOP/AOP maps of a mosaic as PGMs");
  gen.add(*gen_app);
  train.add(*train_app);
  eval.add(*eval_app);
  predict.add(*predict_app);
  compare.add(*compare_app);
  sweep.add(*sweep_app);
  convert.add(*convert_app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_app->parsed()) return gen.run(args, out);
    if (train_app->parsed()) return train.run(args, out);
    if (eval_app->parsed()) return eval.run(args, out);
    if (predict_app->parsed()) return predict.run(args, out);
    if (compare_app->parsed()) return compare.run(args, out);
    if (sweep_app->parsed()) return sweep.run(args, out, err);
    if (convert_app->parsed()) return convert.run(args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const network::CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace skycompass::cli
