// mmw: command-line front end for the hybrid beamforming scheduler
// simulator.
//
//   mmw simulate    --scheduler greedy --episodes 10 --seed 1 --out out/sim
//   mmw gen-dataset --episodes 500 --out out/data
//   mmw train       [--dataset out/data/dataset.mmwds] --out out/model
//   mmw evaluate    --model out/model/model.mmwnn --episodes 200 --out out/eval
//   mmw compare     --schedulers greedy,adaptive,topN,top1,ml --model m.mmwnn --out out/cmp
//
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmw/config.hpp"
#include "mmw/experiment.hpp"
#include "mmw/ml/selector.hpp"
#include "mmw/report.hpp"

namespace fs = std::filesystem;
using namespace mmw;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

using Model = ml::SelectorModel<float>;

struct CommonArgs {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  int episodes = -1;
  int jobs = -1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "Config file (key = value, supports 'extends')");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--seed", a.seed, "Master seed (overrides config)");
  cmd->add_option("--episodes", a.episodes, "Number of episodes (overrides config)");
  cmd->add_option("--jobs", a.jobs, "Episodes run in parallel (timings are only exact with 1)");
}

SystemConfig resolve_config(const CommonArgs& a) {
  SystemConfig cfg = a.config.empty() ? SystemConfig{} : load_config(a.config);
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.jobs > 0) cfg.jobs = a.jobs;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.validate();
  return cfg;
}

std::shared_ptr<const Model> load_shared_model(const std::string& path, const SystemConfig& cfg) {
  auto model = std::make_shared<Model>(ml::load_model<float>(path));
  if (model->num_users != cfg.num_users) {
    throw ConfigError("model " + path + " was trained for " + std::to_string(model->num_users) +
                      " users but the config has " + std::to_string(cfg.num_users));
  }
  return model;
}

NamedScheduler make_scheduler(const std::string& name, const SystemConfig& cfg,
                              const std::vector<std::string>& models) {
  if (name == "ml") {
    if (models.empty()) throw ConfigError("scheduler 'ml' requires --model");
    return ml::ml_scheduler(load_shared_model(models.front(), cfg), "ml", cfg.ml_prune_singular);
  }
  if (name == "exhaustive") {
    // Budget is ZF evaluations per episode, not per slot.
    const double count = subset_count(cfg.num_users, cfg.max_selected) * cfg.slots_per_episode;
    if (count > cfg.exhaustive_cap) {
      throw CombinatorialCapError("exhaustive search needs " + std::to_string(count) +
                                  " subsets per episode, above exhaustive_cap = " +
                                  std::to_string(cfg.exhaustive_cap) +
                                  "; reduce num_users / max_selected to desk scale");
    }
  }
  return builtin_scheduler(name, cfg.exhaustive_cap);
}

void print_table(const std::vector<MetricReport>& reports) {
  std::cout << std::left << std::setw(16) << "scheduler" << std::right << std::setw(12) << "PF[nats]"
            << std::setw(12) << "geo-mean" << std::setw(10) << "mean|M|" << std::setw(11) << "chordal"
            << std::setw(12) << "p50[us]" << std::setw(12) << "p90[us]" << '\n';
  std::cout << std::fixed;
  for (const auto& r : reports) {
    std::cout << std::left << std::setw(16) << r.scheduler << std::right << std::setprecision(4)
              << std::setw(12) << r.mean_pf << std::setw(12) << r.mean_geo_mean << std::setprecision(2)
              << std::setw(10) << r.mean_selected << std::setprecision(3) << std::setw(11)
              << r.mean_min_chordal << std::setprecision(1) << std::setw(12) << r.time_p50_us
              << std::setw(12) << r.time_p90_us << '\n';
  }
  std::cout.unsetf(std::ios::fixed);
}

MetricReport run_and_write(const SystemConfig& cfg, const Codebook& codebook, const NamedScheduler& s,
                           std::size_t episodes, bool per_slot, const fs::path& out) {
  RunOptions opts;
  opts.stream = SeedStream::kTest;
  opts.episodes = episodes;
  opts.jobs = cfg.jobs;
  opts.keep_slots = per_slot;
  const auto traces = run_episodes(cfg, codebook, s, opts);
  MetricReport report = summarize(s.name, traces);
  const std::string tag = [&] {
    std::string t = s.name;
    for (char& c : t) {
      if (c == ':' || c == '/' || c == '+' || c == '(' || c == ')') c = '_';
    }
    return t;
  }();
  {
    auto os = open_output(out / ("cdf_" + tag + ".csv"));
    write_cdf_csv(os, report);
  }
  {
    auto os = open_output(out / ("episodes_" + tag + ".csv"));
    write_episode_csv(os, report);
  }
  if (per_slot) {
    auto os = open_output(out / ("perslot_" + tag + ".csv"));
    write_perslot_csv(os, traces);
  }
  return report;
}

int cmd_simulate(const CommonArgs& a, const std::string& scheduler, const std::vector<std::string>& models,
                 bool per_slot) {
  const SystemConfig cfg = resolve_config(a);
  const auto episodes = static_cast<std::size_t>(a.episodes > 0 ? a.episodes : cfg.test_episodes);
  const NamedScheduler s = make_scheduler(scheduler, cfg, models);
  const fs::path out = cfg.output_dir;
  const Codebook codebook = build_grid_codebook(cfg);
  const MetricReport report = run_and_write(cfg, codebook, s, episodes, per_slot, out);
  {
    auto os = open_output(out / "summary.csv");
    write_summary_header(os);
    write_summary_row(os, report);
  }
  write_manifest(out / "manifest.json", cfg, "simulate",
                 {{"scheduler", scheduler}, {"episodes", episodes}, {"models", models}});
  print_table({report});
  return 0;
}

int cmd_gen_dataset(const CommonArgs& a) {
  const SystemConfig cfg = resolve_config(a);
  const auto episodes = static_cast<std::size_t>(a.episodes > 0 ? a.episodes : cfg.train_episodes);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  const auto ds = ml::generate_dataset(cfg, build_grid_codebook(cfg), episodes, SeedStream::kTrain, cfg.jobs);
  ml::save_dataset(out / "dataset.mmwds", ds);
  write_manifest(out / "manifest.json", cfg, "gen-dataset", {{"episodes", episodes}, {"samples", ds.size()}});
  std::cout << "wrote " << ds.size() << " samples (" << episodes << " episodes x " << cfg.slots_per_episode
            << " slots) to " << (out / "dataset.mmwds").string() << '\n';
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& dataset_path, const std::string& resume,
              int epochs, double lr, const std::string& inputs) {
  SystemConfig cfg = resolve_config(a);
  if (epochs >= 0) cfg.ml_epochs = epochs;
  if (lr > 0) cfg.ml_learning_rate = lr;
  if (!inputs.empty()) cfg.ml_inputs = inputs;
  cfg.validate();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);

  ml::TrainingSet ds;
  if (!dataset_path.empty()) {
    ds = ml::load_dataset(dataset_path);
  } else {
    const auto episodes = static_cast<std::size_t>(a.episodes > 0 ? a.episodes : cfg.train_episodes);
    std::cout << "generating " << episodes << " training episodes with greedy labels...\n";
    ds = ml::generate_dataset(cfg, build_grid_codebook(cfg), episodes, SeedStream::kTrain, cfg.jobs);
  }
  if (ds.num_users != cfg.num_users) throw ConfigError("dataset user count does not match the config");

  Model model;
  auto options = ml::TrainOptions::from_config(cfg);
  if (!resume.empty()) {
    model = ml::load_model<float>(resume);
    options.fit_normalizer = false;
  } else {
    model = ml::make_model<float>(ml::FeatureLayout::parse(cfg.ml_inputs), cfg.num_users, cfg.ml_hidden,
                                  derive_seed(cfg.seed, SeedStream::kNetworkInit, 0));
  }
  auto curve = open_output(out / "training_curve.csv");
  curve << "epoch,train_loss,validation_loss,validation_accuracy\n";
  options.on_epoch = [&](int epoch, double tl, double vl, double va) {
    curve << epoch << ',' << tl << ',' << vl << ',' << va << '\n';
    curve.flush();
    std::cout << "epoch " << epoch << "  train_loss " << tl << "  val_loss " << vl << "  val_acc " << va << '\n';
  };
  const auto report = ml::train(model, ds, options);
  ml::save_model(out / "model.mmwnn", model);
  write_manifest(out / "manifest.json", cfg, "train",
                 {{"samples", ds.size()},
                  {"train_samples", report.train_samples},
                  {"validation_samples", report.validation_samples},
                  {"initial_train_loss", report.initial_train_loss},
                  {"resumed_from", resume},
                  {"inputs", model.layout.to_string()},
                  {"layer_sizes", model.network.sizes()}});
  std::cout << "initial loss " << report.initial_train_loss << "; model written to "
            << (out / "model.mmwnn").string() << '\n';
  return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& model_path) {
  const SystemConfig cfg = resolve_config(a);
  const auto episodes = static_cast<std::size_t>(a.episodes > 0 ? a.episodes : cfg.test_episodes);
  const auto model = load_shared_model(model_path, cfg);
  const Codebook codebook = build_grid_codebook(cfg);
  const fs::path out = cfg.output_dir;

  const auto test = ml::generate_dataset(cfg, codebook, episodes, SeedStream::kTest, cfg.jobs);
  const double accuracy = ml::dataset_accuracy(*model, test);

  std::vector<MetricReport> reports;
  const auto selector = ml::ml_scheduler(model, "ml", cfg.ml_prune_singular);
  reports.push_back(run_and_write(cfg, codebook, selector, episodes, false, out));
  reports.push_back(run_and_write(cfg, codebook, builtin_scheduler("greedy"), episodes, false, out));
  {
    auto os = open_output(out / "summary.csv");
    write_summary_header(os);
    for (const auto& r : reports) write_summary_row(os, r);
  }
  write_manifest(out / "manifest.json", cfg, "evaluate",
                 {{"model", model_path}, {"episodes", episodes}, {"element_accuracy", accuracy}});
  std::cout << "element accuracy vs greedy labels: " << accuracy << '\n';
  print_table(reports);
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_compare(const CommonArgs& a, const std::string& schedulers, const std::vector<std::string>& models,
                bool per_slot) {
  const SystemConfig cfg = resolve_config(a);
  const auto episodes = static_cast<std::size_t>(a.episodes > 0 ? a.episodes : cfg.test_episodes);
  const Codebook codebook = build_grid_codebook(cfg);
  const fs::path out = cfg.output_dir;

  std::vector<NamedScheduler> list;
  for (const auto& name : split_list(schedulers)) {
    if (name == "ml") {
      if (models.empty()) throw ConfigError("scheduler 'ml' requires --model");
      for (const auto& m : models) {
        const auto model = load_shared_model(m, cfg);
        const std::string label = models.size() == 1 ? "ml" : "ml:" + model->layout.to_string() + ":" +
                                                                   fs::path(m).parent_path().filename().string();
        list.push_back(ml::ml_scheduler(model, label, cfg.ml_prune_singular));
      }
    } else {
      list.push_back(make_scheduler(name, cfg, models));
    }
  }
  if (list.empty()) throw ConfigError("no schedulers given");

  std::vector<MetricReport> reports;
  for (const auto& s : list) reports.push_back(run_and_write(cfg, codebook, s, episodes, per_slot, out));
  {
    auto os = open_output(out / "summary.csv");
    write_summary_header(os);
    for (const auto& r : reports) write_summary_row(os, r);
  }
  {
    // Paired comparison on shared seeds.
    auto os = open_output(out / "paired.csv");
    os << "scheduler_a,scheduler_b,episodes,fraction_a_pf_greater\n";
    for (const auto& ra : reports) {
      for (const auto& rb : reports) {
        if (&ra == &rb) continue;
        std::size_t wins = 0;
        for (std::size_t e = 0; e < ra.episodes.size(); ++e) wins += ra.episodes[e].pf > rb.episodes[e].pf;
        os << ra.scheduler << ',' << rb.scheduler << ',' << ra.episodes.size() << ','
           << static_cast<double>(wins) / static_cast<double>(ra.episodes.size()) << '\n';
      }
    }
  }
  write_manifest(out / "manifest.json", cfg, "compare",
                 {{"schedulers", schedulers}, {"models", models}, {"episodes", episodes}});
  print_table(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user mmWave hybrid beamforming scheduler simulator"};
  app.require_subcommand(1);

  CommonArgs sim_args, gen_args, train_args, eval_args, cmp_args;
  std::string scheduler = "greedy";
  std::string schedulers = "greedy,adaptive,topN,top1";
  std::vector<std::string> sim_models, eval_models, cmp_models;
  std::string dataset, resume, inputs;
  int epochs = -1;
  double lr = -1.0;
  bool sim_per_slot = false;
  bool cmp_per_slot = false;

  auto* sim = app.add_subcommand("simulate", "Run episodes with one scheduler");
  add_common(sim, sim_args);
  sim->add_option("--scheduler", scheduler, "greedy|top1|topN|adaptive|exhaustive|ml")
      ->check(CLI::IsMember({"greedy", "top1", "topN", "adaptive", "exhaustive", "ml"}));
  sim->add_option("--model", sim_models, "Model file for the ml scheduler");
  sim->add_flag("--per-slot", sim_per_slot, "Also write perslot_<scheduler>.csv");

  auto* gen = app.add_subcommand("gen-dataset", "Generate greedy-labelled training data");
  add_common(gen, gen_args);

  auto* tr = app.add_subcommand("train", "Train the learned selector");
  add_common(tr, train_args);
  tr->add_option("--dataset", dataset, "Dataset file from gen-dataset (generated on the fly if absent)");
  tr->add_option("--resume", resume, "Continue training from this model file");
  tr->add_option("--epochs", epochs, "Training epochs (overrides config)");
  tr->add_option("--lr", lr, "Adam learning rate (overrides config)");
  tr->add_option("--inputs", inputs, "Input layout, e.g. W+C(W)");

  auto* ev = app.add_subcommand("evaluate", "Accuracy and PF of a trained model on test episodes");
  add_common(ev, eval_args);
  ev->add_option("--model", eval_models, "Model file")->required();

  auto* cmp = app.add_subcommand("compare", "Paired comparison on shared seeds");
  add_common(cmp, cmp_args);
  cmp->add_option("--schedulers", schedulers, "Comma-separated scheduler list (ml uses every --model)");
  cmp->add_option("--scheduler", schedulers, "Alias of --schedulers");
  cmp->add_option("--model", cmp_models, "Model file(s); several give an input/architecture ablation");
  cmp->add_flag("--per-slot", cmp_per_slot, "Also write perslot_<scheduler>.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_args, scheduler, sim_models, sim_per_slot);
    if (*gen) return cmd_gen_dataset(gen_args);
    if (*tr) return cmd_train(train_args, dataset, resume, epochs, lr, inputs);
    if (*ev) return cmd_evaluate(eval_args, eval_models.front());
    if (*cmp) return cmd_compare(cmp_args, schedulers, cmp_models, cmp_per_slot);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
