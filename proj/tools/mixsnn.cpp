#include "settings.hpp"

#include "CLI11.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef MIXSNN_VERSION
#define MIXSNN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mixsnn;
using mixsnn::cli::Settings;

namespace {

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot hash " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    char hex[3];
    std::snprintf(hex, sizeof hex, "%02x", md[i]);
    os << hex;
  }
  return os.str();
}

/// Hashes of every regular file under `path` (or of `path` itself).
Json hashes(const fs::path& path) {
  Json out = Json::object();
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out[f.generic_string()] = sha256_file(f);
  } else if (fs::exists(path)) {
    out[path.generic_string()] = sha256_file(path);
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Run directory with an append-only manifest of the steps run in it.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  /// Relative paths, inputs and outputs alike, resolve inside the run
  /// directory.
  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : root_ / path;
  }

  void record(const std::string& command, std::uint64_t seed, const Settings& settings,
              const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) const {
    const fs::path file = root_ / "manifest.json";
    Json manifest = fs::exists(file) ? read_json(file) : Json{{"steps", Json::array()}};
    Json in = Json::object(), out = Json::object();
    for (const auto& p : inputs) in.update(hashes(p));
    for (const auto& p : outputs) out.update(hashes(p));
    manifest["version"] = MIXSNN_VERSION;
    manifest["compiler"] = __VERSION__;
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["steps"].push_back({{"command", command},
                                 {"time", utc_now()},
                                 {"seed", seed},
                                 {"settings", cli::to_json(settings)},
                                 {"inputs", in},
                                 {"outputs", out}});
    write_json(file, manifest);
  }

 private:
  fs::path root_;
};

SimParams neuron_params(const Settings& s) {
  BehaviorTargets t = s.neuron;
  t.dt = s.data.dt;
  return make_params(t);
}

void write_loss_csv(const fs::path& path, const std::vector<double>& loss) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os.precision(10);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) os << e << ',' << loss[e] << '\n';
}

void write_histogram_csv(const fs::path& path, const FRRReport& report) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << "frr_bin_low,frr_bin_high,count\n";
  std::vector<int> bins(20, 0);
  int overflow = 0;
  for (const auto& t : report.tests) {
    const int b = static_cast<int>((t.frr - 1.0) / 0.25);
    if (b >= 0 && b < 20) ++bins[static_cast<std::size_t>(b)];
    else ++overflow;
  }
  for (int b = 0; b < 20; ++b) os << 1.0 + 0.25 * b << ',' << 1.25 + 0.25 * b << ',' << bins[static_cast<std::size_t>(b)] << '\n';
  os << "6,inf," << overflow << '\n';
}

Network train_network(const Settings& s, const FrozenNoiseDataset& data, std::uint64_t seed,
                      std::uint64_t mismatch_seed, std::vector<double>* loss, bool verbose) {
  TrainConfig cfg = s.train;
  cfg.seed = seed;
  cfg.mismatch.seed = mismatch_seed;
  Network init = init_network(data.params.n_channels, 2, neuron_params(s), seed, s.init);
  auto pairs = data.training_pairs();
  const int every = std::max(cfg.epochs / 10, 1);
  auto rec = train(init, pairs, cfg, [&](int epoch, double l, const Network&) {
    if (verbose && (epoch + 1) % every == 0) std::cerr << "epoch " << epoch + 1 << " loss " << l << "\n";
    return true;
  });
  if (loss) *loss = rec.loss;
  return rec.final_params;
}

HardwareSpec map_file(const Json& j, const HardwareLimits& limits) {
  NetGraph graph = j.contains("nodes") ? graph_from_json(j) : as_graph(spec_from_network(network_from_json(j)));
  return map_graph(convert_to_dynapsim(graph), limits);
}

Runner device_runner(const DeviceConfig& config, const BiasTable& table, double sigma, std::uint64_t seed) {
  MismatchSpec m;
  m.sigma_rel = sigma;
  m.seed = seed;
  auto dev = std::make_shared<VirtualDevice>(config, table, m);
  return [dev](const SpikeRaster& in) { return dev->run(in); };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mismatch-aware spiking network training and deployment toolchain"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", MIXSNN_VERSION);

  std::uint64_t seed = 0;
  std::string settings_file;
  std::string run_dir = "run";
  app.add_option("--seed", seed, "Seed for every random stage")->capture_default_str();
  app.add_option("--config", settings_file, "Settings file (JSON, any subset of show-config)");
  app.add_option("--run-dir", run_dir, "Directory for outputs and the manifest")->capture_default_str();

  // Mismatch flags shared by train, evaluate and run-device.
  std::optional<double> sigma;
  std::optional<int> period;
  std::optional<std::uint64_t> mismatch_seed;
  bool no_mismatch = false;
  auto mismatch_flags = [&](CLI::App* sub) {
    sub->add_option("--sigma,--mismatch-sigma", sigma, "Relative mismatch standard deviation");
    sub->add_option("--mismatch-period", period, "Epochs between mismatch redraws (training)");
    sub->add_option("--mismatch-seed", mismatch_seed, "Mismatch seed (defaults to --seed)");
    sub->add_flag("--no-mismatch", no_mismatch, "Disable mismatch");
  };

  auto* show = app.add_subcommand("show-config", "Print the default settings");

  auto* gen = app.add_subcommand("gen-data", "Generate the frozen-noise dataset");
  std::string data_dir = "data";
  gen->add_option("--out", data_dir, "Dataset directory")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train the two-neuron network");
  std::string net_out = "net.json";
  std::optional<int> epochs;
  train_cmd->add_option("--data", data_dir, "Dataset directory")->capture_default_str();
  train_cmd->add_option("--out", net_out, "Trained network checkpoint")->capture_default_str();
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  std::optional<double> lr, adversarial;
  train_cmd->add_option("--lr", lr, "Adam learning rate");
  train_cmd->add_option("--adversarial-step", adversarial, "Relative adversarial step (0 disables)");
  mismatch_flags(train_cmd);

  auto* eval_cmd = app.add_subcommand("evaluate", "Firing-rate ratio report of a network or device");
  std::string net_in, device_in, report_out = "report.csv", table_in;
  long tests = -1;
  eval_cmd->add_option("--data", data_dir, "Dataset directory")->capture_default_str();
  auto* eval_net = eval_cmd->add_option("--net", net_in, "Network checkpoint");
  auto* eval_dev = eval_cmd->add_option("--device", device_in, "Device configuration (runs the virtual device)");
  eval_net->excludes(eval_dev);
  eval_cmd->add_option("--table", table_in, "Bias table CSV (device only)");
  eval_cmd->add_option("--tests", tests, "Test samples to run (all when negative)");
  eval_cmd->add_option("--out", report_out, "Report CSV")->capture_default_str();
  mismatch_flags(eval_cmd);

  auto* map_cmd = app.add_subcommand("map", "Map a network or graph onto the chip");
  std::string map_in, spec_out = "spec.json", graph_out;
  std::optional<int> chips;
  map_cmd->add_option("--net,--graph", map_in, "Network checkpoint or graph JSON")->required();
  map_cmd->add_option("--chips", chips, "Chips available");
  map_cmd->add_option("--out", spec_out, "Hardware specification")->capture_default_str();
  map_cmd->add_option("--graph-out", graph_out, "Also write the extracted graph");

  auto* quant_cmd = app.add_subcommand("quantize", "Quantize the weights of a hardware specification");
  std::string spec_in, quant_out = "quant.json";
  quant_cmd->add_option("--spec", spec_in, "Hardware specification")->required();
  quant_cmd->add_option("--out", quant_out, "Quantization")->capture_default_str();

  auto* deploy_cmd = app.add_subcommand("deploy", "Build the device configuration");
  std::string quant_in, config_out = "config.json";
  deploy_cmd->add_option("--spec", spec_in, "Hardware specification")->required();
  deploy_cmd->add_option("--quant", quant_in, "Quantization")->required();
  deploy_cmd->add_option("--table", table_in, "Bias table CSV (synthetic when omitted)");
  deploy_cmd->add_option("--out", config_out, "Device configuration")->capture_default_str();

  auto* run_cmd = app.add_subcommand("run-device", "Run AER input through the virtual device");
  std::string config_in, aer_in, aer_out = "output.csv";
  double duration = 0.5;
  run_cmd->add_option("--config", config_in, "Device configuration")->required();
  run_cmd->add_option("--input", aer_in, "Input AER CSV")->required();
  run_cmd->add_option("--duration", duration, "Seconds to run")->capture_default_str();
  run_cmd->add_option("--table", table_in, "Bias table CSV (synthetic when omitted)");
  run_cmd->add_option("--out", aer_out, "Output AER CSV")->capture_default_str();
  mismatch_flags(run_cmd);

  auto* rev_cmd = app.add_subcommand("reverse", "Decode a device configuration into a network");
  std::string rev_out = "decoded.json";
  rev_cmd->add_option("--config", config_in, "Device configuration")->required();
  rev_cmd->add_option("--table", table_in, "Bias table CSV (synthetic when omitted)");
  rev_cmd->add_option("--out", rev_out, "Network checkpoint")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "Training throughput benchmark");
  std::string bench_out = "bench.csv";
  bench_cmd->add_option("--epochs", epochs, "Timed epochs");
  bench_cmd->add_option("--out", bench_out, "Result CSV")->capture_default_str();

  auto* repro = app.add_subcommand("repro", "Run the whole pipeline from one seed");
  long device_tests = -2;
  repro->add_option("--epochs", epochs, "Training epochs");
  repro->add_option("--device-tests", device_tests, "Test samples on the virtual device");

  auto* table_cmd = app.add_subcommand("bias-table", "Write the synthetic bias table as CSV");
  std::string table_out = "bias_table.csv";
  table_cmd->add_option("--out", table_out, "Bias table CSV")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    Settings s = settings_file.empty() ? Settings{} : cli::settings_from_json(read_json(settings_file));
    if (epochs) {
      s.train.epochs = *epochs;
      s.bench_epochs = *epochs;
    }
    if (sigma) {
      s.train.mismatch.sigma_rel = *sigma;
      s.device_sigma = *sigma;
    }
    if (period) s.train.mismatch.refresh_period = *period;
    if (lr) s.train.learning_rate = *lr;
    if (adversarial) s.train.adversarial_step = *adversarial;
    if (chips) s.hardware.chips_available = *chips;
    const std::uint64_t mseed = mismatch_seed.value_or(seed);
    if (no_mismatch) {
      s.train.mismatch_enabled = false;
      s.device_sigma = 0.0;
    }
    if (device_tests >= -1) s.device_tests = device_tests;

    if (*show) {
      std::cout << dump_canonical(cli::to_json(s));
      return 0;
    }

    const RunDir run(run_dir);
    auto load_table = [&] {
      return table_in.empty() ? BiasTable::synthetic(s.table_i0) : load_bias_table(run.resolve(table_in));
    };
    const std::string command = app.get_subcommands().front()->get_name();
    std::vector<fs::path> inputs;
    if (!settings_file.empty()) inputs.push_back(settings_file);

    if (*gen) {
      const fs::path dir = run.resolve(data_dir);
      const auto data = generate_frozen_noise(s.data, seed);
      save_dataset(dir.string(), data);
      // AER copies of the targets feed run-device directly.
      for (int c = 0; c < 2; ++c) {
        save_aer(dir / ("target_" + std::to_string(c) + "_aer.csv"), raster_to_aer(data.targets[c]));
      }
      run.record(command, seed, s, inputs, {dir});
      std::cout << "dataset written to " << dir.string() << "\n";
    } else if (*train_cmd) {
      const fs::path dir = run.resolve(data_dir), out = run.resolve(net_out);
      auto data = load_dataset(dir.string());
      std::vector<double> loss;
      const auto t0 = std::chrono::steady_clock::now();
      Network net = train_network(s, data, seed, mseed, &loss, true);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      Json checkpoint = to_json(net);
      checkpoint["train"] = cli::to_json(s)["train"];
      checkpoint["seed"] = seed;
      checkpoint["loss"] = loss;
      write_json(out, checkpoint);
      const fs::path loss_csv = out.parent_path() / (out.stem().string() + "_loss.csv");
      write_loss_csv(loss_csv, loss);
      inputs.push_back(dir);
      run.record(command, seed, s, inputs, {out, loss_csv});
      std::cout << "trained " << s.train.epochs << " epochs in " << secs << " s, final loss " << loss.back()
                << "\n";
    } else if (*eval_cmd) {
      const fs::path dir = run.resolve(data_dir), out = run.resolve(report_out);
      auto data = load_dataset(dir.string());
      FRRReport report;
      if (!device_in.empty()) {
        auto config = device_config_from_json(read_json(run.resolve(device_in)));
        report = evaluate(device_runner(config, load_table(), s.device_sigma, mseed), data, Stage::hardware,
                          tests);
        inputs.push_back(run.resolve(device_in));
      } else if (!net_in.empty()) {
        Network net = network_from_json(read_json(run.resolve(net_in)));
        if (sigma && *sigma > 0.0 && !no_mismatch) {
          MismatchSpec m;
          m.sigma_rel = *sigma;
          m.seed = mseed;
          net = sample_mismatch(net, m, 0);
        }
        report = evaluate(simulation_runner(net), data, Stage::simulated, tests);
        inputs.push_back(run.resolve(net_in));
      } else {
        throw ParameterError("evaluate needs --net or --device");
      }
      report.write_csv(out.string());
      const fs::path hist = out.parent_path() / (out.stem().string() + "_histogram.csv");
      write_histogram_csv(hist, report);
      inputs.push_back(dir);
      run.record(command, seed, s, inputs, {out, hist});
      std::cout << report.table();
    } else if (*map_cmd) {
      const Json j = read_json(run.resolve(map_in));
      HardwareSpec spec = map_file(j, s.hardware);
      const fs::path out = run.resolve(spec_out);
      write_json(out, to_json(spec));
      std::vector<fs::path> outputs{out};
      if (!graph_out.empty()) {
        const NetGraph g = j.contains("nodes") ? graph_from_json(j) : as_graph(spec_from_network(network_from_json(j)));
        outputs.push_back(run.resolve(graph_out));
        write_json(outputs.back(), to_json(g));
      }
      inputs.push_back(run.resolve(map_in));
      run.record(command, seed, s, inputs, outputs);
      std::cout << "mapped " << spec.n_neurons() << " neurons onto " << spec.cores.size() << " core(s), "
                << spec.n_clusters() << " cluster(s)\n";
    } else if (*quant_cmd) {
      HardwareSpec spec = hardware_spec_from_json(read_json(run.resolve(spec_in)));
      AutoencoderConfig qc = s.quantizer;
      qc.seed = seed;
      auto q = quantize_hardware(spec, qc);
      const fs::path out = run.resolve(quant_out);
      write_json(out, to_json(q));
      inputs.push_back(run.resolve(spec_in));
      run.record(command, seed, s, inputs, {out});
      for (const auto& c : q) std::cout << "cluster " << c.cluster << " loss " << c.loss << "\n";
    } else if (*deploy_cmd) {
      HardwareSpec spec = hardware_spec_from_json(read_json(run.resolve(spec_in)));
      auto q = quantization_from_json(read_json(run.resolve(quant_in)));
      auto config = config_from_specification(spec, q, load_table(), s.hardware);
      const fs::path out = run.resolve(config_out);
      write_json(out, to_json(config));
      inputs.insert(inputs.end(), {run.resolve(spec_in), run.resolve(quant_in)});
      if (!table_in.empty()) inputs.push_back(run.resolve(table_in));
      run.record(command, seed, s, inputs, {out});
      std::cout << "configured " << config.n_neurons() << " neurons on " << config.cores.size() << " core(s)\n";
    } else if (*run_cmd) {
      auto config = device_config_from_json(read_json(run.resolve(config_in)));
      MismatchSpec m;
      m.sigma_rel = s.device_sigma;
      m.seed = mseed;
      auto events = run_device(config, load_table(), load_aer(run.resolve(aer_in)), m, duration);
      const fs::path out = run.resolve(aer_out);
      save_aer(out, events);
      inputs.insert(inputs.end(), {run.resolve(config_in), run.resolve(aer_in)});
      run.record(command, seed, s, inputs, {out});
      std::cout << events.size() << " output events\n";
    } else if (*rev_cmd) {
      auto config = device_config_from_json(read_json(run.resolve(config_in)));
      Network net = net_from_config(config, load_table());
      const fs::path out = run.resolve(rev_out);
      write_json(out, to_json(net));
      inputs.push_back(run.resolve(config_in));
      run.record(command, seed, s, inputs, {out});
      std::cout << "decoded " << net.n_neurons() << " neurons, " << net.n_inputs() << " inputs\n";
    } else if (*bench_cmd) {
      if (s.bench_epochs < 1) throw ParameterError("benchmark epochs must be positive");
      FrozenNoiseParams p = s.data;
      p.n_test = 0;
      auto data = generate_frozen_noise(p, seed);
      TrainConfig cfg = s.train;
      cfg.epochs = s.bench_epochs;
      cfg.seed = seed;
      Network net = init_network(p.n_channels, 2, neuron_params(s), seed, s.init);
      const BenchResult a = bench_training(net, data, cfg);
      const BenchResult b = bench_training(net, data, cfg);
      const fs::path out = run.resolve(bench_out);
      std::ofstream os(out);
      os << "run,epochs,seconds,epochs_per_second,machine\n";
      os << "1," << a.epochs << ',' << a.seconds << ',' << a.epochs_per_second << ",\"" << machine_info() << "\"\n";
      os << "2," << b.epochs << ',' << b.seconds << ',' << b.epochs_per_second << ",\"" << machine_info() << "\"\n";
      os.close();
      run.record(command, seed, s, inputs, {out});
      std::cout << "machine: " << machine_info() << "\n"
                << "epochs/s: " << a.epochs_per_second << ", " << b.epochs_per_second << "\n";
    } else if (*repro) {
      const fs::path dir = run.resolve("data");
      auto data = generate_frozen_noise(s.data, seed);
      save_dataset(dir.string(), data);
      std::vector<double> loss;
      Network net = train_network(s, data, seed, mseed, &loss, true);
      write_json(run.resolve("net.json"), to_json(net));
      write_loss_csv(run.resolve("loss.csv"), loss);

      FRRReport sim = evaluate(simulation_runner(net), data, Stage::simulated);
      sim.write_csv(run.resolve("report_simulated.csv").string());
      write_histogram_csv(run.resolve("histogram_simulated.csv"), sim);

      HardwareSpec spec = map_graph(as_graph(spec_from_network(net)), s.hardware);
      write_json(run.resolve("spec.json"), to_json(spec));
      AutoencoderConfig qc = s.quantizer;
      qc.seed = seed;
      auto q = quantize_hardware(spec, qc);
      write_json(run.resolve("quant.json"), to_json(q));
      const BiasTable table = BiasTable::synthetic(s.table_i0);
      save_bias_table(run.resolve("bias_table.csv"), table);
      FRRReport quant = evaluate(simulation_runner(quantized_network(spec, q, table)), data, Stage::quantized);
      quant.write_csv(run.resolve("report_quantized.csv").string());

      auto config = config_from_specification(spec, q, table, s.hardware);
      write_json(run.resolve("config.json"), to_json(config));
      FRRReport hw = evaluate(device_runner(config, table, s.device_sigma, mseed), data, Stage::hardware, s.device_tests);
      hw.write_csv(run.resolve("report_hardware.csv").string());
      save_aer(run.resolve("target_0_output.csv"), raster_to_aer(device_runner(config, table, s.device_sigma, mseed)(data.targets[0])));

      std::ofstream md(run.resolve("report.md"));
      md << "seed " << seed << "\n\n```\n" << sim.table() << "\n" << quant.table() << "\n" << hw.table() << "```\n";
      md.close();
      run.record(command, seed, s, inputs, {run.resolve("data"), run.resolve("net.json"), run.resolve("loss.csv"),
                                           run.resolve("report_simulated.csv"), run.resolve("spec.json"),
                                           run.resolve("quant.json"), run.resolve("config.json"),
                                           run.resolve("report_quantized.csv"), run.resolve("report_hardware.csv"),
                                           run.resolve("report.md")});
      std::cout << sim.table() << "\n" << quant.table() << "\n" << hw.table();
    } else if (*table_cmd) {
      const fs::path out = run.resolve(table_out);
      save_bias_table(out, BiasTable::synthetic(s.table_i0));
      run.record(command, seed, s, inputs, {out});
    }
  } catch (const RangeError& e) {
    std::cerr << "range error: " << e.what() << "\n";
    return 3;
  } catch (const MappingError& e) {
    std::cerr << "mapping error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
