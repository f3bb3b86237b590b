#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "io.hpp"

struct Context {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string defaults_path;
  json defaults;
  std::vector<std::string> argv;
};

// Registers every subcommand; the chosen one stores its runner in `action`.
void register_commands(CLI::App& app, Context& ctx, std::function<int()>& action);
