#include "cli.hpp"

int main(int argc, char** argv) { return rrss::cli::run_cli(argc, argv); }
