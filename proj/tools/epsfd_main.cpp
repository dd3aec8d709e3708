#include "epsfd/cli.hpp"

int main(int argc, char** argv) { return epsfd::cli::run(argc, argv); }
