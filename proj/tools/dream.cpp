#include "dream/cli/commands.hpp"

int main(int argc, char** argv) { return dream::cli::run(argc, argv); }
