#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "hypstruct/version.hpp"

using namespace hypstruct;
using namespace hypstruct::cli;

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic structured regularization experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool raw_features = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config; default: out)");

  using Command = std::function<void(Json&, const OutputDir&)>;
  Command command;
  std::string command_name;
  auto add = [&](const char* name, const char* help, Command fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&, name, fn] {
      command_name = name;
      command = fn;
    });
    return sub;
  };
  add("embed-tree", "Embed a label tree directly by CPCC ascent (l2 and Poincare)", cmd_embed_tree);
  add("train", "Train an encoder with the flat, l2-CPCC or HypStructure objective", cmd_train);
  add("eval", "delta_rel, test CPCC and kNN accuracy of a checkpoint", cmd_eval);
  add("spectra", "Closed-form and numerical spectra of block correlation matrices", cmd_spectra);
  add("oodsim", "Mahalanobis OOD scoring of one or more checkpoints", cmd_oodsim)
      ->add_flag("--raw-features", raw_features, "Skip centering and unit normalization before scoring");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    Json cfg = load_config(config_path);
    if (seed) cfg["seed"] = *seed;
    take<std::uint64_t>(cfg, "seed", 0);
    if (out_dir.empty()) out_dir = take<std::string>(cfg, "out", "out");
    cfg.erase("out");
    if (raw_features) cfg["standardize"] = false;

    const OutputDir out(out_dir);
    command(cfg, out);
    Json echo = Json::object();
    echo["tool_version"] = kVersion;
    echo["command"] = command_name;
    echo["config"] = cfg;
    out.write_json("config.json", echo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Diverged ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
