#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "defaults_embed.hpp"

namespace {

// The defaults file restates a few constants; refuse to run when they drift from the library.
void check_constants(const json& d) {
  ds_constants c;
  ds_get_constants(&c);
  const auto& k = d.at("constants");
  double ge = k.at("gamma_electron_linear_mhz_per_gauss").get<double>();
  double tilt = k.at("nv_axis_tilt_rad").get<double>();
  if (std::abs(ge - c.gamma_electron_linear) > 1e-9 * c.gamma_electron_linear ||
      std::abs(tilt - c.magic_tilt) > 1e-12) {
    throw InputError("defaults constants disagree with the library");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"darkspin: dark-spin spectroscopy with shallow NV centers"};
  app.set_version_flag("--version", std::string(ds_version()));
  Context ctx;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  std::string out;
  std::optional<std::uint64_t> seed;
  app.add_option("-o,--out", out, "output directory (default: $DARKSPIN_OUT or .)");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--defaults", ctx.defaults_path, "defaults JSON replacing the built-in one");
  app.require_subcommand(1);

  std::function<int()> action;
  register_commands(app, ctx, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!out.empty()) ctx.out_dir = out;
    else if (const char* env = std::getenv("DARKSPIN_OUT"); env && *env) ctx.out_dir = env;
    else ctx.out_dir = ".";
    std::filesystem::create_directories(ctx.out_dir);
    ctx.defaults = ctx.defaults_path.empty() ? json::parse(kEmbeddedDefaults) : read_json(ctx.defaults_path);
    check_constants(ctx.defaults);
    ctx.seed = seed ? *seed : ctx.defaults.at("seed").get<std::uint64_t>();
    return action ? action() : 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
