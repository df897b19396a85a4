#include "frsim/cli.hpp"

int main(int argc, char** argv) { return frsim::cli_main(argc, argv); }
