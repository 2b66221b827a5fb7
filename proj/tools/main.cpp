#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "config.hpp"
#include "experiments.hpp"
#include "vlab/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vlab: occupation measures, sewing and self-interacting Volterra experiments"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  bool verbose = false;
  app.add_option("config_file", config_path, "Experiment config (YAML or JSON)");
  app.add_option("--config", config_path, "Experiment config (YAML or JSON)");
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Output directory (default: $VLAB_OUT_DIR, then ./vlab_out)");
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
  app.add_flag("--verbose", verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);

  if (config_path.empty()) {
    std::cerr << "vlab: a config file is required (--config <path>)\n";
    return 2;
  }
  nlohmann::json resolved;
  try {
    nlohmann::json user = vlab::cli::load_config_file(config_path);
    if (user.is_null()) user = nlohmann::json::object();
    if (!user.is_object()) throw vlab::cli::ValidationError("", "config must be a table");
    if (seed) user["seed"] = static_cast<long long>(*seed);
    if (threads) user["threads"] = static_cast<long long>(*threads);
    if (verbose) user["verbose"] = true;
    resolved = vlab::cli::resolve_config(user);
  } catch (const vlab::cli::ValidationError& e) {
    std::cerr << "vlab: invalid config: " << e.what() << "\n";
    return 2;
  }

  const long long nt = resolved["threads"];
  if (nt > 0) vlab::set_worker_threads(static_cast<std::size_t>(nt));
  if (out.empty()) out = resolved["output"]["dir"].get<std::string>();
  if (out.empty()) {
    const char* env = std::getenv("VLAB_OUT_DIR");
    out = env && *env ? env : "vlab_out";
  }
  return vlab::cli::run_and_write(resolved, out, resolved["verbose"].get<bool>());
}
