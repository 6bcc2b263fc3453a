#include "bandctl/cli.hpp"

int main(int argc, char** argv) { return bandctl::cli::run(argc, argv); }
