// quasilo run <config.json> | quasilo batch <dir>
#include "quasilo.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"quasilo experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", quasilo::kVersion);

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::string> out;
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--samples", samples, "override the Monte Carlo sample count");
  app.add_option("--out", out, "output directory");

  std::string config;
  auto* run = app.add_subcommand("run", "run one config file");
  run->add_option("config", config, "config file")->required();

  std::string dir;
  auto* batch = app.add_subcommand("batch", "run every *.json in a directory");
  batch->add_option("dir", dir, "config directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const quasilo::RunOverrides overrides{seed, samples, out};
  try {
    if (*run) {
      const quasilo::BatchEntry e = quasilo::run_file(config, overrides);
      if (!e.record) {
        std::cerr << "error: " << e.error << "\n";
        return e.exit_code;
      }
      std::cout << quasilo::to_csv(*e.record);
      return 0;
    }
    const std::vector<quasilo::BatchEntry> entries = quasilo::batch(dir, overrides);
    const nlohmann::json summary = quasilo::to_json(entries);
    if (out) quasilo::write_atomically(std::filesystem::path(*out) / "batch_summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    for (const auto& e : entries)
      if (e.exit_code != 0) return e.exit_code;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return quasilo::exit_code_for(e);
  }
}
