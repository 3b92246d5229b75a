#include "rsteer/cli.hpp"

int main(int argc, char** argv) { return rsteer::run_cli(argc, argv); }
