#include "collapse/cli_io.hpp"

int main(int argc, char** argv) { return collapse::run_cli(argc, argv); }
