#include "ldrld/cli/commands.hpp"

int main(int argc, char** argv) { return ldrld::cli::run_cli(argc, argv); }
