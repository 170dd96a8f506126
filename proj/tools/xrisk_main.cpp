#include "xrisk/cli.hpp"

int main(int argc, char** argv) { return xrisk::cli::run(argc, argv); }
