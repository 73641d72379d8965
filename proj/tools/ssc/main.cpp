#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ssc/common.hpp"
#include "ssc/pipeline/pipeline.hpp"

namespace {

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ssc::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const ssc::IoError*>(&e)) return 3;
  return 1;
}

std::string kind(const std::exception& e) {
  if (dynamic_cast<const ssc::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ssc::IoError*>(&e)) return "io";
  if (dynamic_cast<const ssc::ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const ssc::NonFiniteError*>(&e)) return "non_finite";
  if (dynamic_cast<const ssc::DegenerateGeometry*>(&e)) return "degenerate_geometry";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tumour-stroma slide classification pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  bool print_config = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--set", overrides, "override, key=value (repeatable)");
    sub->add_flag("--print-config", print_config, "print the effective config and exit");
  };

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-corpus", "generate the synthetic corpus"},
      {"train-cnn1", "train CNN I (tissue classes) for round train.round"},
      {"train-cnn2", "train CNN II (stroma subtypes) for round train.round"},
      {"mine", "hard negative mining for mine.net / mine.round"},
      {"infer", "CNN I label maps and CNN II likelihood maps for every slide"},
      {"features", "slide features from the maps"},
      {"train-rf", "random forest on train + validation features"},
      {"evaluate", "ROC, AUC and bootstrap CI on the test split"},
      {"run-all", "every stage, with the configured mining rounds"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  ssc::pipeline::Config cfg;
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& o : overrides) cfg.set(o);
    if (app.get_subcommands().front()->count("--seed")) cfg.set("seed", std::to_string(seed));
    if (threads > 0) cfg.set("threads", std::to_string(threads));
    if (!out.empty()) cfg.set("out", out);
    cfg.validate();
    if (print_config) {
      std::cout << cfg.dump();
      return 0;
    }
    std::filesystem::remove(std::filesystem::path(cfg.str("out")) / "error.json");
    namespace p = ssc::pipeline;
    if (command == "gen-corpus") p::gen_corpus(cfg);
    else if (command == "train-cnn1") p::train_cnn(cfg, 1);
    else if (command == "train-cnn2") p::train_cnn(cfg, 2);
    else if (command == "mine") p::mine(cfg);
    else if (command == "infer") p::infer(cfg);
    else if (command == "features") p::features(cfg);
    else if (command == "train-rf") p::train_rf(cfg);
    else if (command == "evaluate") p::evaluate(cfg);
    else p::run_all(cfg);
  } catch (const std::exception& e) {
    nlohmann::json record{{"status", "error"},
                          {"command", command},
                          {"kind", kind(e)},
                          {"message", e.what()}};
    std::cerr << record.dump() << std::endl;
    try {
      const std::filesystem::path dir = cfg.str("out");
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "error.json") << record.dump(2) << '\n';
    } catch (...) {
    }
    return exit_code(e);
  }
  return 0;
}
