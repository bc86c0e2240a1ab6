#include "molbench/cli.hpp"

int main(int argc, char** argv) { return molbench::cli::run(argc, argv); }
