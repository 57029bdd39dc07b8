#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plume/config.hpp"
#include "plume/flow.hpp"
#include "plume/io.hpp"
#include "plume/report.hpp"
#include "plume/scenario.hpp"
#include "plume/transport.hpp"

namespace {

using namespace plume;

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

int cmd_simulate(const std::string& model_path, const std::string& releases_path,
                 const std::string& out_path, bool snapshots) {
  Stopwatch watch;
  auto model = load_model(model_path);
  auto releases = load_releases(releases_path, model);
  auto flow = solve_steady_flow(model);
  TransportOperator op(model, flow);
  TransportOperator::Workspace ws;
  auto result = op.simulate(releases, ws, nullptr, snapshots);

  save_observations({result.observations}, model, out_path);
  if (snapshots) {
    std::ostringstream snap;
    for (const auto& [time, field] : result.snapshots) {
      snap << "# t_months=" << fmt_g17(time / kSecondsPerMonth) << "\n";
      for (int r = 0; r < model.grid.n_rows; ++r) {
        for (int c = 0; c < model.grid.n_cols; ++c) {
          if (c) snap << ",";
          snap << fmt_g17(field[model.grid.idx(r, c)]);
        }
        snap << "\n";
      }
    }
    write_file_atomic(out_path + ".snapshots.csv", snap.str());
  }

  std::printf("observations written to %s\n", out_path.c_str());
  std::printf("mass injected  %.6g g\n", result.mass_injected);
  std::printf("mass stored    %.6g g\n", result.mass_stored);
  std::printf("mass outflow   %.6g g\n", result.mass_outflow);
  std::printf("concentration range [%.6g, %.6g] g/m^3\n",
              result.min_concentration, result.max_concentration);
  std::printf("mass balance error %.3e (tolerance 5e-3)\n",
              result.mass_balance_error());
  if (result.mass_balance_error() >= 5e-3)
    fail("mass balance error exceeds 0.5%");

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.inputs = {{"model", model_path}, {"releases", releases_path}};
  manifest.outputs = {{"observations", out_path}};
  manifest.elapsed_seconds = watch.seconds();
  manifest.timestamp_utc = utc_now();
  save_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

int cmd_gen_dataset(const std::string& model_path, const std::string& scenario,
                    int samples, std::uint64_t seed, int jobs,
                    const std::string& out_path) {
  Stopwatch watch;
  auto model = load_model(model_path);
  ScenarioConfig cfg;
  cfg.kind = scenario_from_name(scenario);
  cfg.n_samples = samples;
  cfg.seed = seed;
  cfg.n_jobs = jobs;

  auto ds = generate_dataset(model, cfg);
  save_dataset(ds, out_path);
  std::printf("dataset written to %s (%d rows, %d inputs -> %d targets)\n",
              out_path.c_str(), ds.size(), ds.n_inputs(), ds.n_targets());

  RunManifest manifest;
  manifest.command = "gen-dataset";
  manifest.inputs = {{"model", model_path},
                     {"scenario", scenario_name(cfg.kind)},
                     {"samples", cfg.samples()},
                     {"seed", seed},
                     {"jobs", jobs}};
  manifest.outputs = {{"dataset", out_path},
                      {"rows", ds.size()},
                      {"inputs", ds.n_inputs()},
                      {"targets", ds.n_targets()}};
  manifest.elapsed_seconds = watch.seconds();
  manifest.timestamp_utc = utc_now();
  save_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

int cmd_train(const std::string& dataset_path, int hidden, int members,
              int epochs, std::uint64_t seed, int jobs,
              const std::string& out_path) {
  Stopwatch watch;
  auto ds = load_dataset(dataset_path);
  NetworkShape shape{ds.n_inputs(), hidden, ds.n_targets()};
  TrainingOptions opt;
  opt.max_epochs = epochs;

  auto ens = train_ensemble(ds.inputs, ds.targets, shape, opt, members, seed,
                            jobs);
  save_ensemble(ens, out_path);
  std::printf("ensemble written to %s (%d members, %d-%d-%d)\n",
              out_path.c_str(), ens.size(), shape.d1, shape.d2, shape.d3);
  for (int m = 0; m < ens.size(); ++m) {
    const auto& log = ens.members[m].log;
    std::printf("member %d: %d epochs, best validation loss %.6g, stop: %s\n",
                m + 1, log.epochs, log.best_validation_loss,
                log.stop_reason.c_str());
  }

  RunManifest manifest;
  manifest.command = "train";
  manifest.inputs = {{"dataset", dataset_path}, {"hidden", hidden},
                     {"members", members},      {"epochs", epochs},
                     {"seed", seed},            {"jobs", jobs}};
  manifest.outputs = {{"ensemble", out_path}};
  manifest.elapsed_seconds = watch.seconds();
  manifest.timestamp_utc = utc_now();
  save_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

int cmd_run_scenario(const std::string& model_path, const std::string& scenario,
                     double alpha, int samples, int hidden, int members,
                     int epochs, std::uint64_t seed, int jobs,
                     const std::string& dataset_path,
                     const std::string& out_dir) {
  Stopwatch watch;
  auto model = load_model(model_path);
  ScenarioConfig cfg;
  cfg.kind = scenario_from_name(scenario);
  cfg.alpha = alpha;
  cfg.n_samples = samples;
  cfg.n_hidden = hidden;
  cfg.n_members = members;
  cfg.training.max_epochs = epochs;
  cfg.seed = seed;
  cfg.n_jobs = jobs;

  std::filesystem::create_directories(out_dir);
  const auto in_dir = [&](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  ScenarioReport report;
  std::string dataset_artifact;
  if (dataset_path.empty()) {
    Stopwatch gen;
    auto ds = generate_dataset(model, cfg);
    const double gen_seconds = gen.seconds();
    dataset_artifact = in_dir("dataset.csv");
    save_dataset(ds, dataset_artifact);
    report = run_scenario(model, cfg, ds);
    report.dataset_seconds = gen_seconds;
  } else {
    dataset_artifact = dataset_path;
    report = run_scenario(model, cfg, load_dataset(dataset_path));
  }

  const std::string ensemble_path = in_dir("ensemble.json");
  save_ensemble(report.ensemble, ensemble_path);
  const auto paths = write_scenario_report(report, out_dir);

  std::fputs(scenario_report_text(report).c_str(), stdout);
  std::printf("\ndataset   %.3f s\ntraining  %.3f s\n", report.dataset_seconds,
              report.training_seconds);
  std::printf("simulate  %.6f s per run\npredict   %.6f s per run\n",
              report.simulate_seconds, report.predict_seconds);
  std::printf("report written to %s\n", out_dir.c_str());

  RunManifest manifest;
  manifest.command = "run-scenario";
  manifest.inputs = {{"model", model_path},
                     {"scenario", scenario_name(cfg.kind)},
                     {"alpha", alpha},
                     {"samples", cfg.samples()},
                     {"hidden", hidden},
                     {"members", members},
                     {"epochs", epochs},
                     {"seed", seed},
                     {"jobs", jobs}};
  if (!dataset_path.empty()) manifest.inputs["dataset"] = dataset_path;
  manifest.outputs = {{"dataset", dataset_artifact},
                      {"ensemble", ensemble_path},
                      {"report", paths.text},
                      {"metrics", paths.metrics},
                      {"plot", paths.plot},
                      {"timings",
                       {{"dataset_seconds", report.dataset_seconds},
                        {"training_seconds", report.training_seconds},
                        {"simulate_seconds", report.simulate_seconds},
                        {"predict_seconds", report.predict_seconds}}}};
  manifest.elapsed_seconds = watch.seconds();
  manifest.timestamp_utc = utc_now();
  save_manifest(manifest, in_dir("manifest.json"));
  return 0;
}

int cmd_evaluate(const std::string& ensemble_path,
                 const std::string& dataset_path, const std::string& out_path) {
  Stopwatch watch;
  auto ens = load_ensemble(ensemble_path);
  auto ds = load_dataset(dataset_path);
  require(ens.members[0].shape.d1 == ds.n_inputs() &&
              ens.members[0].shape.d3 == ds.n_targets(),
          "ensemble and dataset layouts do not match");

  std::vector<double> actual;
  std::vector<double> estimated;
  actual.reserve(static_cast<size_t>(ds.size()) * ds.n_targets());
  estimated.reserve(actual.capacity());
  for (int i = 0; i < ds.size(); ++i) {
    const auto pred = predict_ensemble(ens, ds.inputs[i]);
    for (int j = 0; j < ds.n_targets(); ++j) {
      actual.push_back(ds.targets[i][j]);
      estimated.push_back(pred.mean[j]);
    }
  }
  const auto metrics = evaluate_metrics(actual, estimated);

  std::string out = "key,value\n";
  out += "format_version,1\n";
  out += "dataset," + ds.scenario + "\n";
  out += "rows," + std::to_string(ds.size()) + "\n";
  out += "values," + std::to_string(actual.size()) + "\n";
  out += "ne_pct," + fmt_g17(metrics.ne) + "\n";
  out += "me," + fmt_g17(metrics.me) + "\n";
  out += "mae," + fmt_g17(metrics.mae) + "\n";
  out += "rmse," + fmt_g17(metrics.rmse_value) + "\n";
  out += "nrmse_pct," + fmt_g17(metrics.nrmse) + "\n";
  write_file_atomic(out_path, out);

  std::printf("evaluated %d rows (%zu values)\n", ds.size(), actual.size());
  std::printf("NE %.4f %%  ME %.6g  MAE %.6g  RMSE %.6g  NRMSE %.4f %%\n",
              metrics.ne, metrics.me, metrics.mae, metrics.rmse_value,
              metrics.nrmse);
  std::printf("metrics written to %s\n", out_path.c_str());

  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.inputs = {{"ensemble", ensemble_path}, {"dataset", dataset_path}};
  manifest.outputs = {{"metrics", out_path}};
  manifest.elapsed_seconds = watch.seconds();
  manifest.timestamp_utc = utc_now();
  save_manifest(manifest, out_path + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Groundwater contaminant-source pipeline"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand(
      "simulate", "Run one forward flow + transport simulation");
  std::string sim_model, sim_releases, sim_out = "observations.csv";
  bool sim_snapshots = false;
  sim->add_option("--model", sim_model, "Model config file")->required();
  sim->add_option("--releases", sim_releases, "Release history file")
      ->required();
  sim->add_option("--out", sim_out, "Output observation file");
  sim->add_flag("--snapshots", sim_snapshots,
                "Also write concentration fields at observation times");

  auto* gen = app.add_subcommand(
      "gen-dataset", "Sample release designs and simulate a training dataset");
  std::string gen_model, gen_scenario, gen_out = "dataset.csv";
  int gen_samples = 0;
  int gen_jobs = 1;
  std::uint64_t gen_seed = 1;
  gen->add_option("--model", gen_model, "Model config file")->required();
  gen->add_option("--scenario", gen_scenario,
                  "FWD1, INV1, INV2, INV3 or INV4")
      ->required();
  gen->add_option("--samples", gen_samples,
                  "Sample count (INV2: per candidate cell; 0 = default)");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--jobs", gen_jobs, "Parallel simulation workers");
  gen->add_option("--out", gen_out, "Output dataset file");

  auto* train = app.add_subcommand(
      "train", "Train a network ensemble on a dataset");
  std::string train_dataset, train_out = "ensemble.json";
  int train_hidden = 10, train_members = 10, train_epochs = 1000;
  int train_jobs = 1;
  std::uint64_t train_seed = 1;
  train->add_option("--dataset", train_dataset, "Training dataset file")
      ->required();
  train->add_option("--hidden", train_hidden, "Hidden layer width");
  train->add_option("--members", train_members, "Ensemble size");
  train->add_option("--epochs", train_epochs, "Maximum training epochs");
  train->add_option("--seed", train_seed, "Base seed for member training");
  train->add_option("--jobs", train_jobs, "Parallel training workers");
  train->add_option("--out", train_out, "Output ensemble file");

  auto* run = app.add_subcommand(
      "run-scenario", "Run one scenario end to end and write its report");
  std::string run_model, run_scenario_name, run_dataset, run_out = "scenario_out";
  double run_alpha = 0.0;
  int run_samples = 0, run_hidden = 10, run_members = 10, run_epochs = 1000;
  int run_jobs = 1;
  std::uint64_t run_seed = 1;
  run->add_option("--model", run_model, "Model config file")->required();
  run->add_option("--scenario", run_scenario_name,
                  "FWD1, INV1, INV2, INV3 or INV4")
      ->required();
  run->add_option("--alpha", run_alpha, "Observation noise level");
  run->add_option("--samples", run_samples,
                  "Sample count (INV2: per candidate cell; 0 = default)");
  run->add_option("--hidden", run_hidden, "Hidden layer width");
  run->add_option("--members", run_members, "Ensemble size");
  run->add_option("--epochs", run_epochs, "Maximum training epochs");
  run->add_option("--seed", run_seed, "Random seed");
  run->add_option("--jobs", run_jobs, "Parallel workers");
  run->add_option("--dataset", run_dataset,
                  "Pre-generated dataset file (skips generation)");
  run->add_option("--out-dir", run_out, "Report output directory");

  auto* eval = app.add_subcommand(
      "evaluate", "Score a trained ensemble against a labelled dataset");
  std::string eval_ensemble, eval_dataset, eval_out = "metrics.csv";
  eval->add_option("--ensemble", eval_ensemble, "Ensemble file")->required();
  eval->add_option("--dataset", eval_dataset, "Labelled dataset file")
      ->required();
  eval->add_option("--out", eval_out, "Output metrics file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(sim_model, sim_releases, sim_out, sim_snapshots);
    if (gen->parsed())
      return cmd_gen_dataset(gen_model, gen_scenario, gen_samples, gen_seed,
                             gen_jobs, gen_out);
    if (train->parsed())
      return cmd_train(train_dataset, train_hidden, train_members,
                       train_epochs, train_seed, train_jobs, train_out);
    if (run->parsed())
      return cmd_run_scenario(run_model, run_scenario_name, run_alpha,
                              run_samples, run_hidden, run_members, run_epochs,
                              run_seed, run_jobs, run_dataset, run_out);
    if (eval->parsed())
      return cmd_evaluate(eval_ensemble, eval_dataset, eval_out);
  } catch (const plume::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
