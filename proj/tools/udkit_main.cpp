// Command line entry point. Subcommands are registered as the pipeline
// stages come online; see README for usage.
#include <cstdio>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Universal Dependencies processing toolkit"};
  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);
  return 0;
}
