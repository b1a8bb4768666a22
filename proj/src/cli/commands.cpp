#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fusemetrics/batch.hpp"
#include "fusemetrics/cli.hpp"
#include "fusemetrics/consistency.hpp"
#include "fusemetrics/csv.hpp"
#include "fusemetrics/decomposition.hpp"
#include "fusemetrics/error.hpp"
#include "fusemetrics/surrogate.hpp"
#include "fusemetrics/synth.hpp"

namespace fusemetrics::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;
using metrics::MetricId;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Options {
  std::string config;
  std::string dataset;
  std::string out;
  std::string metrics = "all";
  std::string weights = "1,1";
  std::string env;
  std::string probe;
  std::string surrogate;
  std::string components;
  std::string probe_methods = "average,max,laplacian_blend";
  int workers = 1;
  std::uint64_t seed = 0;
  double alpha = 0.9;
  double beta = 0.9;
  double s = 0.0125;
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 8;
  std::string scores;
  std::string sidecar;
  std::string metric_cols;
  std::string reference_cols;
  std::string from_breakdown;
  int scenes = 50;
  int width = 64;
  int height = 64;
  int count = 10;
  int repeats = 1;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<MetricId> parse_metric_list(const std::string& s) {
  if (s.empty() || s == "all") return {metrics::kAllMetrics.begin(), metrics::kAllMetrics.end()};
  std::vector<MetricId> ids;
  for (const auto& name : split_list(s)) {
    const MetricId id = metrics::metric_from_name(name);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  if (ids.empty()) throw Error(ErrorCode::InvalidArgument, "--metrics selects no metric");
  std::sort(ids.begin(), ids.end());
  return ids;
}

metrics::VanillaWeights parse_weights(const std::string& s) {
  const auto parts = split_list(s);
  if (parts.size() != 2) throw Error(ErrorCode::InvalidArgument, "--weights expects 'ir,vis'");
  metrics::VanillaWeights w{csv::parse_number(parts[0], 0), csv::parse_number(parts[1], 0)};
  metrics::validate(w);
  return w;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing ") + flag);
}

void require_workers(int workers) {
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "--workers must be >= 1");
}

fs::path output_dir(const Options& o) {
  require(o.out, "--out");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec || !fs::is_directory(o.out)) throw Error(ErrorCode::IoError, "cannot create " + o.out);
  return o.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

fs::path require_artifact(const std::string& path, const char* flag) {
  if (path.empty()) throw Error(ErrorCode::MissingArtifact, std::string("missing ") + flag);
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MissingArtifact, "missing artifact " + path);
  return path;
}

nn::TrainConfig train_config(const Options& o) {
  nn::TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  nn::validate(cfg);
  return cfg;
}

struct Job {
  std::string scene;
  std::string method;
};

std::vector<Job> jobs_of(const Dataset& ds) {
  std::vector<Job> jobs;
  for (const auto& s : ds.scenes)
    for (const auto& m : ds.methods) jobs.push_back({s, m});
  return jobs;
}

EnvSource default_env(const Options& o, const Dataset& ds, EnvSource fallback_if_no_labels) {
  if (!o.env.empty()) return env_source_from_name(o.env);
  return fs::is_regular_file(ds.labels_path()) ? EnvSource::File : fallback_if_no_labels;
}

std::string adjusted_header() {
  return csv::join_row(std::vector<std::string>{"scene", "method", "metric", "q_ir", "q_vis",
                                                "delta", "env", "q_star"});
}

void append_adjusted(std::string& text, const Job& job, const env::AdjustedMap& scores) {
  for (const auto& [id, a] : scores) {
    text += csv::join_row(std::vector<std::string>{
        job.scene, job.method, std::string(metrics::name_of(id)), csv::format_number(a.q_ir, 17),
        csv::format_number(a.q_vis, 17), csv::format_number(a.delta, 17),
        csv::format_number(a.env, 17), csv::format_number(a.q_star, 17)});
  }
}

// --- eval-classical ---------------------------------------------------------------------

void cmd_eval_classical(const Options& o, std::ostream& out) {
  require(o.dataset, "--dataset");
  require_workers(o.workers);
  const Dataset ds = scan_dataset(o.dataset);
  const auto ids = parse_metric_list(o.metrics);
  const auto w = parse_weights(o.weights);
  const fs::path dir = output_dir(o);
  const auto jobs = jobs_of(ds);

  std::vector<metrics::MetricVector> results(jobs.size());
  std::vector<metrics::MetricTimings> timings(jobs.size(), metrics::MetricTimings{});
  const auto wall = Clock::now();
  parallel_for(jobs.size(), o.workers, [&](std::size_t i) {
    const auto triple = load_triple(ds, jobs[i].scene, jobs[i].method);
    results[i] = metrics::eval_metrics(triple, w, ids, &timings[i]);
  });
  const double wall_seconds = seconds_since(wall);

  std::vector<std::string> header{"scene", "method"};
  for (MetricId id : ids) header.emplace_back(metrics::name_of(id));
  std::string scores = csv::join_row(header);
  std::string failures =
      csv::join_row(std::vector<std::string>{"scene", "method", "metric", "error"});
  std::size_t failed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::vector<std::string> row{jobs[i].scene, jobs[i].method};
    for (MetricId id : ids) {
      const auto& v = results[i][id];
      row.push_back(v ? csv::format_number(*v, 6) : "");
      if (!v) {
        ++failed;
        failures += csv::join_row(std::vector<std::string>{
            jobs[i].scene, jobs[i].method, std::string(metrics::name_of(id)), results[i].error(id)});
      }
    }
    scores += csv::join_row(row);
  }
  write_text(dir / "classical_scores.csv", scores);
  write_text(dir / "classical_failures.csv", failures);

  json per_metric = json::object(), per_triple = json::object();
  double fr_sum = 0.0;
  for (MetricId id : ids) {
    double total = 0.0;
    for (const auto& t : timings) total += t[static_cast<std::size_t>(metrics::index_of(id))];
    per_metric[std::string(metrics::name_of(id))] = total;
    per_triple[std::string(metrics::name_of(id))] = total / static_cast<double>(jobs.size());
    if (metrics::is_full_reference(id)) fr_sum += total;
  }
  const json timing{{"triples", jobs.size()},
                    {"workers", o.workers},
                    {"wall_seconds", wall_seconds},
                    {"metric_seconds_total", per_metric},
                    {"metric_seconds_per_triple", per_triple},
                    {"full_reference_seconds_per_triple", fr_sum / static_cast<double>(jobs.size())}};
  write_text(dir / "classical_timing.json", timing.dump(2) + "\n");

  if (!o.probe.empty()) {
    const auto probe = probe::load_probe(require_artifact(o.probe, "--probe"));
    const auto envs = scene_env(ds, default_env(o, ds, EnvSource::Heuristic));
    std::vector<env::AdjustedMap> adjusted(jobs.size());
    parallel_for(jobs.size(), o.workers, [&](std::size_t i) {
      const auto triple = load_triple(ds, jobs[i].scene, jobs[i].method);
      const auto pair = o.components.empty()
                            ? probe::decompose(triple.fused, probe)
                            : probe::load_components(o.components, jobs[i].scene, jobs[i].method,
                                                     triple.fused);
      adjusted[i] = env::adjusted_all(triple, pair, envs.at(jobs[i].scene));
    });
    std::string text = adjusted_header();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      env::AdjustedMap selected;
      for (const auto& [id, a] : adjusted[i]) {
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) selected.emplace(id, a);
      }
      append_adjusted(text, jobs[i], selected);
    }
    write_text(dir / "classical_adjusted.csv", text);
  }

  out << "eval-classical: " << jobs.size() << " triples x " << ids.size() << " metrics, "
      << failed << " failed cells, " << std::setprecision(4) << wall_seconds << " s wall\n";
}

// --- eval-surrogate ----------------------------------------------------------------------

void cmd_eval_surrogate(const Options& o, std::ostream& out) {
  require(o.dataset, "--dataset");
  require_workers(o.workers);
  const auto probe_file = require_artifact(o.probe, "--probe");
  const auto surrogate_file = require_artifact(o.surrogate, "--surrogate");
  const Dataset ds = scan_dataset(o.dataset);
  const fs::path dir = output_dir(o);
  const auto probe = probe::load_probe(probe_file);
  const auto params = surrogate::load_surrogate(surrogate_file);
  const EnvSource source = o.env.empty() ? EnvSource::Model : env_source_from_name(o.env);
  std::map<std::string, double> envs;
  if (source != EnvSource::Model) envs = scene_env(ds, source);
  const auto jobs = jobs_of(ds);

  std::vector<env::AdjustedMap> results(jobs.size());
  std::vector<double> seconds(jobs.size());
  const auto wall = Clock::now();
  parallel_for(jobs.size(), o.workers, [&](std::size_t i) {
    const auto triple = load_triple(ds, jobs[i].scene, jobs[i].method);
    const auto start = Clock::now();
    results[i] = source == EnvSource::Model
                     ? surrogate::predict_adjusted(triple, probe, params)
                     : surrogate::predict_adjusted(triple, probe, params, envs.at(jobs[i].scene));
    seconds[i] = seconds_since(start);
  });
  const double wall_seconds = seconds_since(wall);

  std::string text = adjusted_header();
  for (std::size_t i = 0; i < jobs.size(); ++i) append_adjusted(text, jobs[i], results[i]);
  write_text(dir / "surrogate_scores.csv", text);
  const double mean = std::accumulate(seconds.begin(), seconds.end(), 0.0) /
                      static_cast<double>(seconds.size());
  const json timing{{"triples", jobs.size()},
                    {"workers", o.workers},
                    {"wall_seconds", wall_seconds},
                    {"seconds_per_triple", mean}};
  write_text(dir / "surrogate_timing.json", timing.dump(2) + "\n");
  out << "eval-surrogate: " << jobs.size() << " triples, " << std::setprecision(4) << mean * 1e3
      << " ms per triple\n";
}

// --- training ---------------------------------------------------------------------------------

void cmd_train_probe(const Options& o, std::ostream& out) {
  require(o.dataset, "--dataset");
  const Dataset ds = scan_dataset(o.dataset);
  const auto methods = split_list(o.probe_methods);
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "--probe-methods is empty");
  for (const auto& m : methods) {
    if (!std::binary_search(ds.methods.begin(), ds.methods.end(), m)) {
      throw Error(ErrorCode::LayoutError, "dataset has no fused method '" + m + "'");
    }
  }
  const auto cfg = train_config(o);
  const fs::path dir = output_dir(o);
  std::vector<probe::ProbeSample> samples;
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    auto t = load_triple(ds, ds.scenes[i], methods[i % methods.size()]);
    samples.push_back({std::move(t.ir), std::move(t.vis), std::move(t.fused)});
  }
  const auto result = probe::train_probe(samples, cfg);
  probe::save_probe(result.params, dir / "probe.bin");
  std::string curve = csv::join_row(std::vector<std::string>{"epoch", "loss"});
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
    curve += csv::join_row(
        std::vector<std::string>{std::to_string(e), csv::format_number(result.loss_curve[e], 17)});
  }
  write_text(dir / "probe_loss.csv", curve);
  out << "train-probe: " << samples.size() << " samples, " << cfg.epochs
      << " epochs, final loss " << result.params.final_loss << ", "
      << result.params.serialized_bytes() << " bytes\n";
}

void cmd_train_surrogate(const Options& o, std::ostream& out) {
  require(o.dataset, "--dataset");
  require_workers(o.workers);
  const auto probe_file = require_artifact(o.probe, "--probe");
  const Dataset ds = scan_dataset(o.dataset);
  const auto cfg = train_config(o);
  const fs::path dir = output_dir(o);
  const auto probe = probe::load_probe(probe_file);
  const EnvSource source = default_env(o, ds, EnvSource::Heuristic);
  if (source == EnvSource::Model) {
    throw Error(ErrorCode::InvalidArgument, "train-surrogate needs --env file or heuristic labels");
  }
  const auto envs = scene_env(ds, source);

  std::vector<surrogate::SurrogateScene> scenes(ds.scenes.size());
  parallel_for(ds.scenes.size(), o.workers, [&](std::size_t i) {
    const auto& id = ds.scenes[i];
    const GrayImage ir = load_gray(ds.ir_path(id));
    const GrayImage vis = load_gray(ds.vis_path(id));
    std::vector<GrayImage> fused;
    for (const auto& m : ds.methods) fused.push_back(load_gray(ds.fused_path(m, id)));
    scenes[i] = surrogate::make_scene(id, ir, vis, fused, probe, envs.at(id));
  });
  const auto result = surrogate::train(scenes, cfg, o.workers);
  surrogate::save_surrogate(result.params, dir / "surrogate.bin");
  write_text(dir / "surrogate_loss.csv", surrogate::format_loss_curve(result.curve));
  out << "train-surrogate: " << scenes.size() << " scenes x " << ds.methods.size() << " methods, "
      << cfg.epochs << " epochs";
  if (!result.curve.empty()) out << ", final loss " << result.curve.back().loss.total;
  out << "\n";
}

// --- mc ---------------------------------------------------------------------------------------

void cmd_mc(const Options& o, std::ostream& out) {
  mc::McReport report;
  if (!o.from_breakdown.empty()) {
    report = mc::parse_breakdown_csv(csv::read_file(o.from_breakdown));
  } else {
    require(o.scores, "--scores");
    const auto table = mc::read_score_table(o.scores, o.sidecar);
    auto metric_cols = split_list(o.metric_cols);
    auto reference_cols = split_list(o.reference_cols);
    if (metric_cols.empty()) metric_cols = table.columns_of(mc::ColumnKind::Metric);
    if (reference_cols.empty()) reference_cols = table.columns_of(mc::ColumnKind::Reference);
    if (metric_cols.empty() || reference_cols.empty()) {
      throw Error(ErrorCode::InvalidArgument, "mc needs at least one metric and one reference column");
    }
    report = mc::mc_report(table, metric_cols, reference_cols, {o.alpha, o.beta, o.s});
  }
  const fs::path dir = output_dir(o);
  write_text(dir / "mc_matrix.csv", mc::format_matrix_csv(report));
  write_text(dir / "mc_breakdown.csv", mc::format_breakdown_csv(report));
  const std::string pretty = mc::format_pretty(report);
  write_text(dir / "mc_report.txt", pretty);
  out << pretty;
}

// --- bench ------------------------------------------------------------------------------------

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

void cmd_bench(const Options& o, std::ostream& out) {
  if (o.count < 1 || o.repeats < 1) {
    throw Error(ErrorCode::InvalidArgument, "--count and --repeats must be >= 1");
  }
  std::vector<metrics::FusionTriple> triples;
  if (!o.dataset.empty()) {
    const Dataset ds = scan_dataset(o.dataset);
    for (const auto& job : jobs_of(ds)) {
      if (triples.size() == static_cast<std::size_t>(o.count)) break;
      triples.push_back(load_triple(ds, job.scene, job.method));
    }
  } else {
    for (const auto& spec : synth::manifest(static_cast<std::size_t>(o.count), o.seed, o.width, o.height)) {
      auto pair = synth::gen_pair(spec);
      auto fusions = synth::gen_fusions(pair.ir, pair.vis);
      const auto& f = fusions[triples.size() % fusions.size()];
      triples.push_back({pair.ir, pair.vis, f.fused, f.method, synth::scene_id(triples.size())});
    }
  }
  const bool trained = !o.probe.empty() && !o.surrogate.empty();
  const auto probe = o.probe.empty() ? probe::ProbeParams::initialize(o.seed)
                                     : probe::load_probe(require_artifact(o.probe, "--probe"));
  const auto params = o.surrogate.empty()
                          ? surrogate::SurrogateParams::initialize(o.seed)
                          : surrogate::load_surrogate(require_artifact(o.surrogate, "--surrogate"));
  const metrics::VanillaWeights w;

  std::array<std::vector<double>, metrics::kMetricCount> per_metric;
  std::vector<double> classical, one_pass;
  auto run = [&](const metrics::FusionTriple& t, bool record) {
    double sum = 0.0;
    for (MetricId id : metrics::kAllMetrics) {
      const auto start = Clock::now();
      try {
        if (metrics::is_full_reference(id)) {
          (void)metrics::vanilla_fusion_score(t, id, w);
        } else {
          (void)metrics::reference_free(id, t.fused);
        }
      } catch (const Error&) {
      }
      const double sec = seconds_since(start);
      if (metrics::is_full_reference(id)) sum += sec;
      if (record) per_metric[static_cast<std::size_t>(metrics::index_of(id))].push_back(sec);
    }
    const auto start = Clock::now();
    (void)surrogate::predict_adjusted(t, probe, params);
    const double sec = seconds_since(start);
    if (record) {
      classical.push_back(sum);
      one_pass.push_back(sec);
    }
  };
  run(triples.front(), false);  // warmup
  for (int r = 0; r < o.repeats; ++r)
    for (const auto& t : triples) run(t, true);

  json metric_json = json::object();
  std::ostringstream table;
  table << std::left << std::setw(22) << "metric" << std::right << std::setw(14) << "mean [ms]"
        << std::setw(14) << "std [ms]" << "\n";
  for (MetricId id : metrics::kAllMetrics) {
    const Stat s = stat_of(per_metric[static_cast<std::size_t>(metrics::index_of(id))]);
    metric_json[std::string(metrics::name_of(id))] = {{"mean_seconds", s.mean}, {"std_seconds", s.std}};
    table << std::left << std::setw(22) << metrics::name_of(id) << std::right << std::fixed
          << std::setprecision(3) << std::setw(14) << s.mean * 1e3 << std::setw(14) << s.std * 1e3
          << "\n";
  }
  const Stat c = stat_of(classical), p = stat_of(one_pass);
  const double speedup = p.mean > 0.0 ? c.mean / p.mean : 0.0;
  table << std::left << std::setw(22) << "classical (8 metrics)" << std::right << std::setw(14)
        << c.mean * 1e3 << std::setw(14) << c.std * 1e3 << "\n"
        << std::left << std::setw(22) << "surrogate one-pass" << std::right << std::setw(14)
        << p.mean * 1e3 << std::setw(14) << p.std * 1e3 << "\n"
        << "speedup " << std::setprecision(1) << speedup << "x over " << classical.size()
        << " images" << (trained ? "" : " (untrained weights)") << "\n";
  const json report{{"images", classical.size()},
                    {"width", triples.front().fused.width()},
                    {"height", triples.front().fused.height()},
                    {"metrics", metric_json},
                    {"classical_full_reference_sum", {{"mean_seconds", c.mean}, {"std_seconds", c.std}}},
                    {"surrogate_one_pass", {{"mean_seconds", p.mean}, {"std_seconds", p.std}}},
                    {"speedup", speedup},
                    {"surrogate_trained", trained}};
  if (!o.out.empty()) {
    const fs::path dir = output_dir(o);
    write_text(dir / "bench.json", report.dump(2) + "\n");
    write_text(dir / "bench.txt", table.str());
  }
  out << table.str();
}

// --- synth ------------------------------------------------------------------------------------

void cmd_synth(const Options& o, std::ostream& out) {
  require_workers(o.workers);
  if (o.scenes < 1) throw Error(ErrorCode::InvalidArgument, "--scenes must be >= 1");
  const fs::path dir = output_dir(o);
  const auto specs = synth::manifest(static_cast<std::size_t>(o.scenes), o.seed, o.width, o.height);
  synth::write_dataset(dir, specs, o.workers);
  out << "synth: " << specs.size() << " scenes x " << synth::kMethodCount << " methods written to "
      << dir.string() << "\n";
}

// --- plumbing ---------------------------------------------------------------------------------

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key = value config file; flags take precedence");
  sub->add_option("--seed", o.seed, "random seed (falls back to $FUSEMETRICS_SEED, then 0)");
  sub->add_option("--workers", o.workers, "worker threads");
  sub->add_option("--out", o.out, "output directory");
}

void add_training(CLI::App* sub, Options& o) {
  sub->add_option("--epochs", o.epochs, "training epochs");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--batch-size", o.batch_size, "minibatch size");
}

void apply_config_and_env(CLI::App* sub, const Options& o) {
  std::map<std::string, std::string> config;
  if (!o.config.empty()) {
    std::ifstream f(o.config);
    if (!f) throw Error(ErrorCode::IoError, "cannot open config " + o.config);
    std::stringstream buf;
    buf << f.rdbuf();
    config = parse_config(buf.str());
  }
  for (const auto& [key, value] : config) {
    if (key == "config") throw Error(ErrorCode::ParseError, "config files cannot include others");
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) {
      throw Error(ErrorCode::ParseError, "unknown config key '" + key + "' for " + sub->get_name());
    }
    if (opt->count() == 0) {
      opt->add_result(value);
      opt->run_callback();
    }
  }
  CLI::Option* seed = sub->get_option_no_throw("--seed");
  if (seed && seed->count() == 0 && !config.count("seed")) {
    if (const char* env_seed = std::getenv(kSeedEnvVar); env_seed && *env_seed) {
      const std::string value(env_seed);
      if (value.find_first_not_of("0123456789") != std::string::npos) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(kSeedEnvVar) + " must be a non-negative integer");
      }
      seed->add_result(value);
      seed->run_callback();
    }
  }
}

void report_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"fusemetrics: image fusion quality metrics, learned evaluator and metric consistency"};
  app.require_subcommand(1);
  std::map<CLI::App*, std::function<void(const Options&, std::ostream&)>> commands;

  auto* ec = app.add_subcommand("eval-classical", "classical metrics per (scene, method)");
  add_common(ec, o);
  ec->add_option("--dataset", o.dataset, "dataset root");
  ec->add_option("--metrics", o.metrics, "comma separated metric names or 'all'");
  ec->add_option("--weights", o.weights, "source weights 'ir,vis'");
  ec->add_option("--probe", o.probe, "probe parameters; adds environment-adjusted scores");
  ec->add_option("--components", o.components, "directory of precomputed decompositions");
  ec->add_option("--env", o.env, "env source for adjusted scores: file or heuristic");
  commands[ec] = cmd_eval_classical;

  auto* es = app.add_subcommand("eval-surrogate", "one-pass learned evaluation");
  add_common(es, o);
  es->add_option("--dataset", o.dataset, "dataset root");
  es->add_option("--probe", o.probe, "probe parameters");
  es->add_option("--surrogate", o.surrogate, "surrogate parameters");
  es->add_option("--env", o.env, "env source: model (default), file or heuristic");
  commands[es] = cmd_eval_surrogate;

  auto* tp = app.add_subcommand("train-probe", "train the decomposition probe");
  add_common(tp, o);
  add_training(tp, o);
  tp->add_option("--dataset", o.dataset, "dataset root");
  tp->add_option("--probe-methods", o.probe_methods, "fused methods cycled over the scenes");
  commands[tp] = cmd_train_probe;

  auto* ts = app.add_subcommand("train-surrogate", "train the surrogate evaluator");
  add_common(ts, o);
  add_training(ts, o);
  ts->add_option("--dataset", o.dataset, "dataset root");
  ts->add_option("--probe", o.probe, "probe parameters");
  ts->add_option("--env", o.env, "env label source: file or heuristic");
  commands[ts] = cmd_train_surrogate;

  auto* mcc = app.add_subcommand("mc", "metric consistency report");
  add_common(mcc, o);
  mcc->add_option("--scores", o.scores, "score table CSV");
  mcc->add_option("--sidecar", o.sidecar, "column kinds JSON");
  mcc->add_option("--metric-cols", o.metric_cols, "metric columns (default: sidecar kinds)");
  mcc->add_option("--reference-cols", o.reference_cols, "reference columns (default: sidecar kinds)");
  mcc->add_option("--from-breakdown", o.from_breakdown, "rebuild the report from a breakdown CSV");
  mcc->add_option("--alpha", o.alpha, "metric-side rank weight base");
  mcc->add_option("--beta", o.beta, "reference-side rank weight base");
  mcc->add_option("--s", o.s, "scaling factor");
  commands[mcc] = cmd_mc;

  auto* bn = app.add_subcommand("bench", "per-metric timing and surrogate speedup");
  add_common(bn, o);
  bn->add_option("--dataset", o.dataset, "dataset root (default: synthetic triples)");
  bn->add_option("--count", o.count, "number of triples");
  bn->add_option("--repeats", o.repeats, "passes over the triples");
  bn->add_option("--width", o.width, "synthetic width");
  bn->add_option("--height", o.height, "synthetic height");
  bn->add_option("--probe", o.probe, "probe parameters");
  bn->add_option("--surrogate", o.surrogate, "surrogate parameters");
  commands[bn] = cmd_bench;

  auto* sy = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(sy, o);
  sy->add_option("--scenes", o.scenes, "number of scenes");
  sy->add_option("--width", o.width, "scene width");
  sy->add_option("--height", o.height, "scene height");
  commands[sy] = cmd_synth;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      for (CLI::App* sub : app.get_subcommands()) out << sub->help();
      return 0;
    }
    report_error(err, "UsageError", e.what());
    return 2;
  }
  try {
    CLI::App* sub = app.get_subcommands().front();
    apply_config_and_env(sub, o);
    commands.at(sub)(o, out);
  } catch (const Error& e) {
    report_error(err, std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const CLI::Error& e) {
    report_error(err, "UsageError", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return 1;
  }
  return 0;
}

}  // namespace fusemetrics::cli
