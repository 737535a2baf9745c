// varfvv: command-line front end for the simulator.
//
// Exit codes
//   0  success
//   1  unexpected internal error
//   2  usage, configuration or malformed input
//   3  I/O error
//   4  insufficient history for training
//   5  decodability violation (stderr names the dump file)

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varfvv/varfvv.hpp"

namespace {

using namespace varfvv;

constexpr std::uint64_t kUnsetSeed = std::numeric_limits<std::uint64_t>::max();
constexpr int kUnsetChunks = std::numeric_limits<int>::min();

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return 3;
    case ErrorCode::InsufficientHistory: return 4;
    case ErrorCode::DecodabilityViolation: return 5;
    case ErrorCode::Config:
    case ErrorCode::Parse:
    case ErrorCode::Validation:
    case ErrorCode::InvalidView:
    case ErrorCode::Shape: return 2;
    default: return 1;
  }
}

/// Options shared by every subcommand that builds an ExperimentConfig.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_views;
  std::optional<int> users, chunks;
  std::optional<std::string> model;
  std::optional<std::string> traces;
  std::optional<int> fps;
  std::optional<double> chunk_seconds;

  void attach(CLI::App* app, bool with_traffic) {
    app->add_option("-c,--config", config_path, "key = value configuration file");
    app->add_option("--set", overrides, "override a configuration key (key=value), repeatable");
    app->add_option("--seed", seed, "random seed (fallback: FVV_SEED, then 1)");
    app->add_option("--n-views", n_views, "number of camera views N");
    app->add_option("--fps", fps, "frames per second");
    app->add_option("--chunk-seconds", chunk_seconds, "chunk duration in seconds");
    if (with_traffic) {
      app->add_option("--users", users, "number of simulated users");
      app->add_option("--chunks", chunks, "experiment length in chunks (replay default: last trace event)");
      app->add_option("--model", model, "behavior model: low, high or mixed");
      app->add_option("--traces", traces, "trace CSV to replay");
    }
  }

  /// File, then FVV_SEED (if the file set no seed), then --set, then flags.
  ExperimentConfig build() const {
    ExperimentConfig cfg;
    cfg.seed = kUnsetSeed;
    cfg.chunks = kUnsetChunks;
    if (!config_path.empty()) load_config(cfg, config_path);
    if (cfg.seed == kUnsetSeed) {
      cfg.seed = 1;
      if (const char* env = std::getenv("FVV_SEED"); env && *env) set_config_value(cfg, "run.seed", env);
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    if (seed) cfg.seed = *seed;
    if (n_views) cfg.stream.n_views = *n_views;
    if (users) cfg.n_users = *users;
    if (chunks) cfg.chunks = *chunks;
    if (model) cfg.model.kind = parse_interactivity(*model);
    if (traces) cfg.traces = *traces;
    if (fps) cfg.stream.fps = *fps;
    if (chunk_seconds) cfg.stream.chunk_seconds = *chunk_seconds;
    if (cfg.chunks == kUnsetChunks)
      cfg.chunks = cfg.traces.empty()
                       ? ExperimentConfig{}.chunks
                       : trace_extent_chunks(load_traces(cfg.traces, cfg.stream.n_views), cfg.stream.frames_per_chunk());
    return cfg;
  }
};

std::vector<double> parse_list(const std::string& what, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      fail(ErrorCode::Config, what + ": '" + cell + "' is not a number");
    }
  }
  return out;
}

// ---- gen-traces ------------------------------------------------------------

struct GenTraces {
  Common common;
  std::string out;
  std::optional<double> zipf;
  std::optional<int> burst_period;

  void attach(CLI::App* app) {
    common.attach(app, true);
    app->remove_option(app->get_option("--traces"));
    app->add_option("-o,--out", out, "output trace CSV (default: stdout)");
    app->add_option("--zipf", zipf, "Zipf exponent of view targets around the hotspot");
    app->add_option("--burst-period", burst_period, "chunks between hotspot jumps");
  }

  int run() const {
    if (!common.n_views) fail(ErrorCode::Config, "--n-views is required");
    ExperimentConfig cfg = common.build();
    if (zipf) cfg.model.zipf = *zipf;
    if (burst_period) cfg.model.burst_period = *burst_period;
    cfg.validate();
    BehaviorModel m = cfg.model;
    m.seed = cfg.seed;
    const int f = cfg.stream.frames_per_chunk();
    const auto traces = gen_traces(m, cfg.n_users, cfg.chunks, cfg.stream.n_views, f);
    if (out.empty())
      save_traces(std::cout, traces);
    else
      save_traces(out, traces);
    (out.empty() ? std::cerr : std::cout)
        << "users=" << traces.size() << " chunks=" << cfg.chunks << " switch_rate=" << std::setprecision(4)
        << switch_rate(traces, cfg.chunks, f) << '\n';
    return 0;
  }
};

// ---- train -----------------------------------------------------------------

struct Train {
  Common common;
  std::string checkpoint = "model.ckpt";
  std::string init;
  bool online = false;
  std::string target = "switching";
  std::optional<int> epochs, batch, order;
  std::optional<double> lr;

  void attach(CLI::App* app) {
    common.attach(app, true);
    app->add_option("--checkpoint", checkpoint, "where to write the trained model");
    app->add_option("--init", init, "start from this checkpoint instead of a random initialization");
    app->add_flag("--online", online, "refit chunk by chunk as in the online phase (needs --init)");
    app->add_option("--target", target, "popularity series to learn: switching or constant")
        ->check(CLI::IsMember({"switching", "constant"}));
    app->add_option("--epochs", epochs, "initial training epochs");
    app->add_option("--batch", batch, "mini-batch size");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--cheb-order", order, "Chebyshev order M");
  }

  int run() const {
    ExperimentConfig cfg = common.build();
    if (epochs) cfg.train.epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (lr) cfg.train.learning_rate = *lr;
    if (order) cfg.train.cheb_order = *order;
    if (online && init.empty()) fail(ErrorCode::Config, "--online needs --init");
    // Only the measured popularity is needed: replay the traces under the
    // equal split without any predictor.
    cfg.scheme = Scheme::Uniform;
    cfg.compare_schemes = false;
    cfg.validate();
    const TrainConfig& tc = cfg.train;
    std::cout << "lr=" << tc.learning_rate << " batch=" << tc.batch_size << " epochs=" << tc.epochs
              << " M=" << tc.cheb_order << " tau=" << tc.tau << " d=" << tc.horizon << " blocks=" << tc.blocks
              << '\n';

    const ExperimentReport rep = run_experiment(cfg);
    std::vector<Eigen::VectorXd> series;
    for (const auto& a : rep.actual) series.push_back(target == "constant" ? a.x : a.x_hat);
    // The last chunk is held out.
    if (series.size() < static_cast<std::size_t>(tc.horizon + 2))
      fail(ErrorCode::InsufficientHistory, "need at least " + std::to_string(tc.horizon + 2) +
                                               " chunks (one held out), have " + std::to_string(series.size()));
    const Eigen::VectorXd held_out = series.back();
    series.pop_back();

    const ViewGraph graph = experiment_graph(cfg);
    StgnnTrainer trainer = init.empty() ? StgnnTrainer(graph, tc, cfg.seed)
                                        : StgnnTrainer(graph, tc, load_checkpoint(init), cfg.seed);
    double final_mae = 0;
    if (online) {
      for (std::size_t len = static_cast<std::size_t>(tc.horizon + 1); len <= series.size(); ++len) {
        const std::vector<Eigen::VectorXd> prefix(series.begin(), series.begin() + static_cast<long>(len));
        const auto r = trainer.online_update(prefix);
        if (!r.epoch_mae.empty()) final_mae = r.epoch_mae.back();
      }
    } else {
      const auto r = trainer.initial_fit(series);
      if (!r.epoch_mae.empty()) final_mae = r.epoch_mae.back();
    }
    if (tc.epochs == 0 && !online) {
      const auto samples = make_samples(series, tc.tau, tc.horizon, trainer.scale());
      final_mae = trainer.evaluate_mae(samples);
    }
    save_checkpoint(checkpoint, trainer.params());

    const Eigen::VectorXd gnn = trainer.predict(series).col(0);
    const double holdout = (gnn - held_out).cwiseAbs().mean();
    const double ppc = (series.back() - held_out).cwiseAbs().mean();
    std::cout << std::setprecision(6) << "final_mae=" << final_mae << " holdout_mae=" << holdout
              << " ppc_holdout_mae=" << ppc << " checkpoint=" << checkpoint << '\n';
    return 0;
  }
};

// ---- allocate --------------------------------------------------------------

struct Allocate {
  Common common;
  std::string popularity_path, p_text, p_hat_text, previous_text;
  std::optional<double> budget;
  std::string out;

  void attach(CLI::App* app) {
    common.attach(app, false);
    app->add_option("--popularity", popularity_path, "CSV with columns view,p,p_hat");
    app->add_option("--p", p_text, "constant-view popularity, comma separated");
    app->add_option("--p-hat", p_hat_text, "switching-view popularity, comma separated");
    app->add_option("--previous", previous_text, "previous chunk's constant rates (Mbit), comma separated");
    app->add_option("--budget", budget, "chunk budget in Mbit (default: target rate x chunk duration)");
    app->add_option("-o,--out", out, "allocation CSV (default: stdout)");
  }

  void read_popularity(std::vector<double>& p, std::vector<double>& p_hat) const {
    std::ifstream in(popularity_path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + popularity_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || (line_no == 1 && line.rfind("view", 0) == 0)) continue;
      const auto cells = parse_list(popularity_path + ":" + std::to_string(line_no), line);
      require(cells.size() == 3 && cells[0] == static_cast<double>(p.size() + 1), ErrorCode::Parse,
              popularity_path + ":" + std::to_string(line_no) + ": expected view,p,p_hat with views in order");
      p.push_back(cells[1]);
      p_hat.push_back(cells[2]);
    }
  }

  int run() const {
    ExperimentConfig cfg = common.build();
    std::vector<double> p, p_hat;
    if (!popularity_path.empty()) {
      read_popularity(p, p_hat);
    } else {
      if (p_text.empty() || p_hat_text.empty()) fail(ErrorCode::Config, "give --popularity or both --p and --p-hat");
      p = parse_list("--p", p_text);
      p_hat = parse_list("--p-hat", p_hat_text);
    }
    require(!p.empty() && p.size() == p_hat.size(), ErrorCode::Config, "p and p_hat need the same, nonzero length");
    const int n = static_cast<int>(p.size());
    if (common.n_views && *common.n_views != n) fail(ErrorCode::Config, "--n-views differs from the popularity length");
    cfg.stream.n_views = n;
    cfg.validate();

    const double r_avg = cfg.target_rate() * cfg.stream.chunk_seconds;
    const double fair = r_avg / (2.0 * n);
    const RateBounds bounds{cfg.bound_lo * fair, cfg.bound_hi * fair, cfg.bound_lo * fair, cfg.bound_hi * fair};
    std::vector<double> prev = previous_text.empty() ? uniform_allocate(r_avg, n, bounds).constant
                                                     : parse_list("--previous", previous_text);
    require(prev.size() == p.size(), ErrorCode::Config, "--previous needs one rate per view");

    const Allocation a = allocate(p, p_hat, prev, budget.value_or(r_avg), cfg.qoe, bounds);
    std::ofstream file;
    if (!out.empty()) {
      file.open(out);
      require(static_cast<bool>(file), ErrorCode::Io, "cannot write " + out);
    }
    std::ostream& os = out.empty() ? std::cout : file;
    os << std::setprecision(10);
    write_allocation_header(os);
    write_allocation_rows(os, a);
    const auto q = qoe_total(a.constant, a.switching, std::span<const double>(prev), p, p_hat, cfg.qoe);
    // The summary stays off stdout when stdout carries the CSV.
    std::ostream& summary = out.empty() ? std::cerr : std::cout;
    summary << "budget=" << a.budget << " spent=" << a.total() << " lambda=" << a.lambda << " iterations=" << a.iterations
            << " qoe=" << q.total << " flags=" << flags_to_string(a.flags) << '\n';
    return 0;
  }
};

// ---- run / report ----------------------------------------------------------

void print_summary(std::ostream& os, const ReportSummary& s) {
  os << std::setprecision(6);
  os << "seed=" << s.seed << " chunks=" << s.chunks << " sessions=" << s.sessions
     << " decodable=" << s.decodable_sessions << " reencoded=" << s.frames_reencoded << '\n';
  for (const auto& name : s.schemes) os << "qoe_median " << name << ' ' << median(s.qoe.at(name)) << '\n';
  for (const auto& [name, v] : s.precision) os << "precision_median " << name << ' ' << median(v) << '\n';
  os << "switches=" << s.switches << " delay_mean_ms=" << s.delay_mean_ms << " delay_max_ms=" << s.delay_max_ms
     << " startup_mean_ms=" << s.startup_mean_ms << '\n';
  os << "bits varfvv=" << s.bits_varfvv << " has10=" << s.bits_has10 << " conventional=" << s.bits_conventional
     << '\n';
}

struct Run {
  Common common;
  std::string out = "reports";
  std::optional<std::string> scheme;
  bool no_compare = false;

  void attach(CLI::App* app) {
    common.attach(app, true);
    app->add_option("-o,--out", out, "report directory");
    app->add_option("--scheme", scheme, "allocation streamed to users: adaptive, ppc-only, gnn-only, uniform");
    app->add_flag("--no-compare", no_compare, "skip the other schemes");
  }

  int run() const {
    ExperimentConfig cfg = common.build();
    if (scheme) cfg.scheme = parse_scheme(*scheme);
    if (no_compare) cfg.compare_schemes = false;
    cfg.dump_dir = out;
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    require(!ec, ErrorCode::Io, "cannot create " + out);
    const ExperimentReport rep = run_experiment(cfg);
    emit_report(rep, out);
    print_summary(std::cout, summarize(rep));
    return 0;
  }
};

struct Report {
  std::string dir = "reports";

  void attach(CLI::App* app) { app->add_option("dir", dir, "report directory holding summary.json"); }

  int run() const {
    print_summary(std::cout, load_summary((std::filesystem::path(dir) / "summary.json").string()));
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varfvv: free-view video streaming simulator"};
  app.require_subcommand(1);

  GenTraces gen;
  Train train;
  Allocate alloc;
  Run run;
  Report report;
  gen.attach(app.add_subcommand("gen-traces", "generate synthetic user view traces"));
  train.attach(app.add_subcommand("train", "train the popularity GNN on replayed traces"));
  alloc.attach(app.add_subcommand("allocate", "solve one chunk's bit allocation"));
  run.attach(app.add_subcommand("run", "run a closed-loop experiment and write its report"));
  report.attach(app.add_subcommand("report", "print the summary of a report directory"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (app.got_subcommand("gen-traces")) return gen.run();
    if (app.got_subcommand("train")) return train.run();
    if (app.got_subcommand("allocate")) return alloc.run();
    if (app.got_subcommand("run")) return run.run();
    if (app.got_subcommand("report")) return report.run();
  } catch (const Error& e) {
    std::cerr << "varfvv: " << e.what() << '\n';
    const int code = exit_code(e.code());
    if (e.code() == ErrorCode::Config) std::cerr << sub->help() << '\n';
    return code;
  } catch (const std::exception& e) {
    std::cerr << "varfvv: internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
