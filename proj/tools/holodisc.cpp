#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "holodisc/cli.hpp"
#include "holodisc/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pseudoholomorphic disc solver"};
  std::string config_path;
  std::string output;
  bool sequential = false;
  bool check_only = false;
  app.add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", output, "Output directory (overrides the config)");
  app.add_flag("--sequential", sequential, "Single-threaded, bitwise reproducible run");
  app.add_flag("--check", check_only, "Validate the config and print its canonical form");
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  if (check_only) {
    try {
      std::cout << holodisc::validate_config(text) << std::endl;
      return 0;
    } catch (const holodisc::Error& e) {
      std::cerr << config_path << ": " << e.what() << std::endl;
      return 1;
    }
  }
  try {
    const holodisc::RunResult r = holodisc::run_config(text, output, sequential);
    (r.exit_code == 0 ? std::cout : std::cerr) << r.message << std::endl;
    return r.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
