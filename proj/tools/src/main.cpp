#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "voxelpaint/error.hpp"

using namespace voxelpaint;

int main(int argc, char** argv) {
  CLI::App app{"voxelpaint: masked 3D inpainting of healthy brain tissue"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  const char* names[] = {"prepare", "train", "infer", "evaluate", "report"};
  const char* help[] = {"synthesize five-component samples and a manifest",
                        "k-fold training with best-validation checkpoints",
                        "inpaint voided scans with trained checkpoints",
                        "score predictions on the healthy masks",
                        "print the five-statistic summary table"};
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config_path, "JSON run config")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the working directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    cli::RunConfig config = cli::load_config(config_path);
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) config.workdir = std::filesystem::absolute(out_dir);
    config.resolve();
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "prepare") cli::cmd_prepare(config, std::cerr);
    if (command == "train") cli::cmd_train(config, std::cerr);
    if (command == "infer") cli::cmd_infer(config, std::cerr);
    if (command == "evaluate") cli::cmd_evaluate(config, std::cerr);
    if (command == "report") cli::cmd_report(config, std::cout, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return cli::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
