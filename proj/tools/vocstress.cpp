#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vocstress/archive.hpp"
#include "vocstress/attribution.hpp"
#include "vocstress/coupling.hpp"
#include "vocstress/error.hpp"
#include "vocstress/features.hpp"
#include "vocstress/ingest.hpp"
#include "vocstress/keyvalue.hpp"
#include "vocstress/learn.hpp"
#include "vocstress/pipeline.hpp"
#include "vocstress/reports.hpp"
#include "vocstress/server.hpp"
#include "vocstress/session.hpp"
#include "vocstress/simulator.hpp"

namespace fs = std::filesystem;
using namespace vocstress;

namespace {

// Usage problems: bad flags, unreadable or malformed inputs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

CohortSpec load_cohort(const std::string& path) {
  if (path.empty()) return {};
  try {
    CohortSpec spec = cohort_spec_from(KeyValues::load(path));
    validate(spec);
    return spec;
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// A directory of archives (sorted by name) or a single archive file.
std::vector<SessionRecord> load_sessions(const std::string& in) {
  std::vector<std::string> paths;
  if (fs::is_directory(in)) {
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == kArchiveExtension) paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
  } else if (fs::is_regular_file(in)) {
    paths.push_back(in);
  }
  if (paths.empty()) throw UsageError("no session archives in " + in);
  std::vector<SessionRecord> out;
  for (const auto& p : paths) out.push_back(load_archive(p));
  return out;
}

Dataset load_dataset(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return read_dataset_csv(text);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// Steady clock running speed times faster than real time.
class ScaledClock : public Clock {
 public:
  explicit ScaledClock(double speed) : speed_(speed), t0_(base_.now_ms()) {}
  std::int64_t now_ms() const override {
    return static_cast<std::int64_t>(static_cast<double>(base_.now_ms() - t0_) * speed_);
  }

 private:
  SteadyClock base_;
  double speed_;
  std::int64_t t0_;
};

std::atomic<bool> g_interrupted{false};
void on_signal(int) { g_interrupted = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal stress sensing pipeline: simulation, ingestion, features, coupling, classification, "
               "attribution and live session control."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vocstress 1.0");

  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::string in, out, config;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a cohort and write one archive per participant plus truth.csv");
  sim->add_option("--cohort,--config", config, "Cohort spec file (key=value); defaults apply when omitted");
  sim->add_option("--seed", seed, "Random seed")->capture_default_str();
  sim->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--out", out, "Output directory")->required();

  // ingest
  std::string participant = "P01";
  auto* ing = app.add_subcommand("ingest", "Collect a serial line capture into a session archive");
  ing->add_option("--in", in, "Device or capture file ('-' for stdin)")->required();
  ing->add_option("--participant", participant, "Participant id stored in the archive")->capture_default_str();
  ing->add_option("--out", out, "Output session archive")->required();

  // features
  auto* feat = app.add_subcommand("features", "Extract windowed features from session archives");
  feat->add_option("--in", in, "Archive directory or single archive")->required();
  feat->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  feat->add_option("--out", out, "Output dataset CSV")->required();

  // couple
  std::size_t n_perm = 1000;
  auto* cpl = app.add_subcommand("couple", "Lagged physiology/TVOC coupling analysis");
  cpl->add_option("--in", in, "Archive directory or single archive")->required();
  cpl->add_option("--seed", seed, "Surrogate seed")->capture_default_str();
  cpl->add_option("--perm", n_perm, "Surrogates per lag scan")->capture_default_str()->check(CLI::PositiveNumber);
  cpl->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cpl->add_option("--out", out, "Output report")->required();

  // train-eval
  std::string model_name = "rf", regime_name_opt = "kfold", save_model;
  auto* te = app.add_subcommand("train-eval", "Cross-validated classification of Rest vs Stress windows");
  te->add_option("--dataset,--in", in, "Dataset CSV")->required();
  te->add_option("--model", model_name, "rf, svm-rbf or svm-linear")
      ->capture_default_str()
      ->check(CLI::IsMember({"rf", "svm-rbf", "svm-linear"}));
  te->add_option("--regime", regime_name_opt, "kfold (stratified 5-fold) or loso (leave one subject out)")
      ->capture_default_str()
      ->check(CLI::IsMember({"kfold", "loso"}));
  te->add_option("--seed", seed, "Random seed")->capture_default_str();
  te->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  te->add_option("--out", out, "Output report")->required();
  te->add_option("--save-model", save_model, "Also write a model trained on the full mean-imputed dataset");

  // attribute
  auto* att = app.add_subcommand("attribute", "TreeSHAP attribution, modality shares and fusion comparison");
  att->add_option("--dataset,--in", in, "Dataset CSV")->required();
  att->add_option("--regime", regime_name_opt, "Regime for the fusion table: kfold or loso")
      ->capture_default_str()
      ->check(CLI::IsMember({"kfold", "loso"}));
  att->add_option("--seed", seed, "Random seed")->capture_default_str();
  att->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  att->add_option("--out", out, "Output report")->required();

  // serve
  std::string host = "127.0.0.1", device;
  int port = 8080;
  double speed = 1.0;
  auto* srv = app.add_subcommand("serve", "Run the session controller HTTP API");
  srv->add_option("--host", host, "Bind address")->capture_default_str();
  srv->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));
  srv->add_option("--out", out, "Directory for completed session archives")->required();
  srv->add_option("--device", device, "Serial device or pipe; the simulated bridge is used when omitted");
  srv->add_option("--config", config, "Cohort spec for the simulated bridge");
  srv->add_option("--seed", seed, "Seed for the simulated bridge")->capture_default_str();
  srv->add_option("--speed", speed, "Session clock rate relative to real time")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "End-to-end run: simulate, features, both CV regimes, coupling, "
                                              "attribution; exits 1 if any embedded check fails");
  rep->add_option("--config", config, "Cohort spec file (key=value); defaults apply when omitted");
  rep->add_option("--seed", seed, "Random seed")->capture_default_str();
  rep->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  rep->add_option("--perm", n_perm, "Surrogates per lag scan")->capture_default_str()->check(CLI::PositiveNumber);
  rep->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      const CohortSpec spec = load_cohort(config);
      const Cohort cohort = simulate_cohort(spec, seed, threads);
      for (const auto& s : cohort.sessions) {
        write_file(fs::path(out) / (s.meta.id + std::string(kArchiveExtension)), write_archive(s));
      }
      write_file(fs::path(out) / "truth.csv", truth_csv(cohort.truth));
      std::cout << fmt::format("{} sessions written to {}\n", cohort.sessions.size(), out);
    } else if (*ing) {
      ParticipantMeta meta;
      meta.id = participant;
      IngestResult r;
      if (in == "-") {
        r = ingest_stream(std::cin, meta);
      } else {
        std::ifstream stream(in, std::ios::binary);
        if (!stream) throw UsageError("cannot read " + in);
        r = ingest_stream(stream, meta);
      }
      write_file(out, write_archive(r.record));
      std::cout << fmt::format("{} frames, {} markers, {} acks, {} malformed lines\n", r.record.frames.size(),
                               r.record.markers.size(), r.acks, r.malformed_lines);
    } else if (*feat) {
      const Dataset d = build_dataset(load_sessions(in), threads);
      write_file(out, write_dataset_csv(d));
      std::cout << fmt::format("{} windows ({} Stress)\n", d.size(), d.count(Label::Stress));
    } else if (*cpl) {
      const auto report = analyze_cohort(load_sessions(in), {n_perm, seed}, threads);
      write_file(out, format_coupling(report));
    } else if (*te) {
      const Dataset d = load_dataset(in);
      ModelSpec spec;
      spec.kind = *model_kind_from_name(model_name);
      const EvalReport r = evaluate(spec, d, *regime_from_name(regime_name_opt), seed, threads);
      write_file(out, format_eval(r));
      if (!save_model.empty()) {
        Matrix x = d.matrix();
        std::vector<double> means(x.cols, 0.0);
        for (std::size_t c = 0; c < x.cols; ++c) {
          double s = 0;
          std::size_t n = 0;
          for (std::size_t i = 0; i < x.rows; ++i) {
            if (!is_missing(x(i, c))) {
              s += x(i, c);
              ++n;
            }
          }
          if (n) means[c] = s / static_cast<double>(n);
        }
        const Model m = train(spec, fill_missing(x, means), d.labels(), seed, threads);
        write_file(save_model, write_model(m));
      }
    } else if (*att) {
      const Dataset d = load_dataset(in);
      const auto r = attribute(d, ModelSpec{}, *regime_from_name(regime_name_opt), seed, threads);
      write_file(out, format_attribution(r));
    } else if (*srv) {
      const CohortSpec cohort = load_cohort(config);
      fs::create_directories(out);
      std::shared_ptr<const Clock> clock;
      if (speed == 1.0) {
        clock = std::make_shared<SteadyClock>();
      } else {
        clock = std::make_shared<ScaledClock>(speed);
      }
      BridgeFactory factory;
      std::unique_ptr<std::fstream> dev;
      if (!device.empty()) {
        dev = std::make_unique<std::fstream>(device, std::ios::in | std::ios::out | std::ios::binary);
        if (!*dev) throw UsageError("cannot open " + device);
        factory = [&dev](const ParticipantMeta&) -> std::unique_ptr<SensorBridge> {
          return std::make_unique<SerialBridge>(*dev, *dev);
        };
      } else {
        // Each new session takes the next planned participant of the cohort.
        auto plan = std::make_shared<std::vector<ParticipantSpec>>(plan_cohort(cohort, seed));
        auto next = std::make_shared<std::size_t>(0);
        factory = [plan, next](const ParticipantMeta& meta) -> std::unique_ptr<SensorBridge> {
          ParticipantSpec p = (*plan)[(*next)++ % plan->size()];
          p.id = meta.id;
          return std::make_unique<SimulatedBridge>(p);
        };
      }
      SessionService service(clock, factory, out);
      ServerOptions options;
      options.host = host;
      options.port = port;
      SessionServer server(service, options);
      const int bound = server.start();
      std::cout << fmt::format("listening on http://{}:{}\n", host, bound) << std::flush;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_interrupted) {
        service.tick();
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
      }
      server.stop();
    } else if (*rep) {
      const CohortSpec spec = load_cohort(config);
      ReproduceOptions options;
      options.seed = seed;
      options.threads = threads;
      options.n_perm = n_perm;
      const Bundle bundle = reproduce(spec, options);
      write_bundle(bundle, out);
      std::cout << bundle.checks_text();
      if (!bundle.passed()) {
        for (const auto& c : bundle.checks) {
          if (!c.passed) std::cerr << "check failed: " << c.name << "\n";
        }
        return 1;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
