/*
 * Copyright 2026 The Scene Novelty Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "scenenov/cli/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scenenov/cli/experiment.hpp"
#include "scenenov/errors.hpp"
#include "scenenov/util/parallel.hpp"

namespace scenenov::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::vector<std::string> checkpoints;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string space = "latent";
  std::string detector = "lof";
  CLI::Option* seed_opt = nullptr;
};

void diagnostic(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

void setup_logging() {
  auto logger = spdlog::get("scenenov");
  if (!logger) logger = spdlog::stderr_color_mt("scenenov");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  const char* env = std::getenv("SCENE_NOVELTY_LOG");
  if (!env) return;
  const std::string v = env;
  if (v == "error") spdlog::set_level(spdlog::level::err);
  else if (v == "info") spdlog::set_level(spdlog::level::info);
  else if (v == "debug") spdlog::set_level(spdlog::level::debug);
  else throw UsageError("SCENE_NOVELTY_LOG must be error, info or debug, got '" + v + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

class Runner {
 public:
  Runner(const Options& o, const std::string& command) : o_(o), command_(command) {
    cfg_ = o.config.empty() ? ExperimentConfig::desk() : load_experiment(o.config);
    if (o.seed_opt && o.seed_opt->count()) {
      if (command == "generate") cfg_.dataset.seed = o.seed;
      else if (command == "train" || command == "ablation") cfg_.train.seed = o.seed;
      else cfg_.detector.seed = o.seed;
    }
    cfg_.check();
    set_num_threads(o.threads);
  }

  int operator()() {
    const fs::path out = o_.out.empty() ? default_dir(command_) : fs::path(o_.out);
    ensure_dir(out);
    write_experiment(cfg_, out / "config.json");
    spdlog::debug("{}: writing to {}", command_, out.string());
    if (command_ == "generate") generate(out);
    else if (command_ == "train") train(out);
    else if (command_ == "embed") embed(out);
    else if (command_ == "score") score(out);
    else if (command_ == "evaluate") evaluate(out);
    else if (command_ == "project") project_cmd(out);
    else if (command_ == "ablation") ablation(out);
    return kExitOk;
  }

 private:
  fs::path default_dir(const std::string& command) const {
    static const std::map<std::string, std::string> sub = {{"generate", "data"},     {"train", "train"},
                                                           {"embed", "embed"},       {"score", "score"},
                                                           {"evaluate", "eval"},     {"project", "project"},
                                                           {"ablation", "ablation"}};
    return fs::path(cfg_.out) / sub.at(command);
  }

  dataset::Dataset load_data() const {
    const fs::path dir = o_.data.empty() ? default_dir("generate") : fs::path(o_.data);
    spdlog::info("loading dataset {}", dir.string());
    auto d = dataset::load_dataset(dir);
    spdlog::info("{} entries, {} isomorphism classes", d.size(), d.index.num_classes());
    return d;
  }

  std::vector<fs::path> checkpoint_paths() const {
    std::vector<fs::path> out;
    for (const auto& c : o_.checkpoints) out.emplace_back(c);
    if (out.empty())
      for (const auto& a : cfg_.architectures)
        out.push_back(default_dir("train") / (models::encoder_name(a.kind) + ".snvl"));
    return out;
  }

  models::Checkpoint first_checkpoint() const {
    const auto paths = checkpoint_paths();
    if (paths.size() > 1 && !o_.checkpoints.empty())
      throw UsageError(command_ + " takes a single --checkpoint");
    spdlog::info("loading checkpoint {}", paths.front().string());
    return models::load_checkpoint(paths.front());
  }

  void generate(const fs::path& out) const {
    spdlog::info("generating {} scenes (seed {})", cfg_.dataset.total(), cfg_.dataset.seed);
    const auto d = generate_dataset(cfg_.dataset, out);
    spdlog::info("{} entries, {} isomorphism classes", d.size(), d.index.num_classes());
  }

  void train(const fs::path& out) const {
    const auto data = load_data();
    for (const auto& arch : cfg_.architectures) {
      const std::string name = models::encoder_name(arch.kind);
      spdlog::info("training {} for {} epochs (seed {})", name, cfg_.train.epochs, cfg_.train.seed);
      const auto ckpt = models::train(data, arch, cfg_.train, [&](const models::EpochMetrics& m) {
        spdlog::info("{} epoch {}: triplet {:.6f} recon {:.6f} zero {:.3f} ({:.1f} s)", name, m.epoch, m.triplet,
                     m.recon, m.zero_fraction, m.seconds);
      });
      models::save_checkpoint(ckpt, out / (name + ".snvl"));
      write_text(out / (name + ".metrics.jsonl"), models::metrics_to_json_lines(ckpt.history));
    }
  }

  void embed(const fs::path& out) const {
    const auto data = load_data();
    const auto ckpt = first_checkpoint();
    const auto z = models::embed(ckpt, image_pointers(data));
    std::string csv = "id,tag";
    for (std::size_t j = 0; j < ckpt.encoder.latent_dim; ++j) csv += ",z" + std::to_string(j);
    csv += "\n";
    char buf[40];
    for (std::size_t i = 0; i < z.size(); ++i) {
      csv += std::to_string(data.entries[i].id) + "," + data.entries[i].tag;
      for (double v : z[i]) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        csv += buf;
      }
      csv += "\n";
    }
    write_text(out / "embeddings.csv", csv);
  }

  void score(const fs::path& out) const {
    const auto data = load_data();
    const auto kind = outlier::parse_detector(o_.detector);
    const auto space = eval::parse_space(o_.space);
    const auto split = make_split(data, cfg_.split);
    eval::AucResult r;
    if (kind == outlier::DetectorKind::kRecon) {
      if (space != eval::Space::kLatent) throw UsageError("recon scores images and takes no --space input");
      r = eval::run_recon_experiment(first_checkpoint(), image_pointers(data), split);
    } else if (space == eval::Space::kInput) {
      r = eval::run_auc_experiment(eval::image_rows(image_pointers(data)), split, kind, cfg_.detector);
    } else {
      r = eval::run_auc_experiment(models::embed(first_checkpoint(), image_pointers(data)), split, kind,
                                   cfg_.detector);
    }
    outlier::write_scores_csv(r.scored, out / ("scores_" + o_.space + "_" + o_.detector + ".csv"));
    std::printf("%s\n", json{{"detector", o_.detector}, {"space", o_.space}, {"auc", r.auc}}.dump().c_str());
  }

  void evaluate(const fs::path& out) const {
    const auto data = load_data();
    eval::Report report;
    bool first = true;
    for (const auto& path : checkpoint_paths()) {
      spdlog::info("evaluating {}", path.string());
      const auto ckpt = models::load_checkpoint(path);
      evaluate_checkpoint(data, ckpt, cfg_, path.stem().string(), report);
      if (first) report.projection = project(data, ckpt);
      first = false;
    }
    evaluate_input(data, cfg_, report);
    log_table(report);
    eval::export_report(report, out);
  }

  void project_cmd(const fs::path& out) const {
    const auto data = load_data();
    write_text(out / "projection.csv", eval::projection_to_csv(project(data, first_checkpoint())));
  }

  void ablation(const fs::path& out) const {
    const auto data = load_data();
    auto report = run_ablation(data, cfg_, out, [](const std::string& name, const models::EpochMetrics& m) {
      spdlog::info("{} epoch {}: triplet {:.6f} recon {:.6f} ({:.1f} s)", name, m.epoch, m.triplet, m.recon,
                   m.seconds);
    });
    log_table(report);
    eval::export_report(report, out);
  }

  static void log_table(const eval::Report& r) {
    for (const auto& row : r.auc) {
      std::string line = row.name + ":";
      for (const auto& [det, v] : row.auc) line += fmt::format(" {} {:.3f}", det, v);
      spdlog::info("{}", line);
    }
  }

  const Options& o_;
  std::string command_;
  ExperimentConfig cfg_;
};

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Scenario novelty detection on rasterized road scenes"};
  app.name("scenenov");
  app.require_subcommand(1, 1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    bool data, checkpoint, multi_checkpoint, detector;
  };
  const Command commands[] = {
      {"generate", "Generate scenes and write a dataset directory", false, false, false, false},
      {"train", "Train every configured architecture on a dataset", true, false, false, false},
      {"embed", "Write latent vectors of every dataset entry", true, true, false, false},
      {"score", "Fit one detector on the base split and score all entries", true, true, false, true},
      {"evaluate", "AUC table, d_local curves and projection for trained checkpoints", true, true, true, false},
      {"project", "Two-dimensional projection of the latent vectors", true, true, false, false},
      {"ablation", "Train and evaluate every architecture under every ablation variant", true, false, false, false},
  };
  for (const auto& s : commands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    o.seed_opt = sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--threads", o.threads, "Worker cap")->check(CLI::PositiveNumber);
    if (s.data) sub->add_option("--data", o.data, "Dataset directory")->check(CLI::ExistingDirectory);
    if (s.checkpoint) {
      auto* c = sub->add_option("--checkpoint", o.checkpoints, "Checkpoint file")->check(CLI::ExistingFile);
      if (!s.multi_checkpoint) c->expected(1);
    }
    if (s.detector) {
      sub->add_option("--space", o.space, "Point space")->check(CLI::IsMember({"latent", "input"}));
      sub->add_option("--detector", o.detector, "Outlier detector")
          ->check(CLI::IsMember({"lof", "abod", "iforest", "ocsvm", "recon"}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnostic("usage", e.what());
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  for (CLI::App* sub : app.get_subcommands())
    if (sub->get_name() == command) o.seed_opt = sub->get_option("--seed");
  try {
    setup_logging();
    Runner runner(o, command);
    return runner();
  } catch (const UsageError& e) {
    diagnostic(e.kind(), e.what());
    return kExitUsage;
  } catch (const Error& e) {
    diagnostic(e.kind(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    diagnostic("internal", e.what());
    return kExitRuntime;
  }
}

}  // namespace scenenov::cli
