#include "lurye/cli.hpp"

int main(int argc, char** argv) { return lurye::cli::run_cli(argc, argv); }
