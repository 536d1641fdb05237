#include "padbench/cli.hpp"

int main(int argc, char** argv) { return padbench::cli::run(argc, argv); }
