#include "l2g/cli.hpp"

int main(int argc, char** argv) { return l2g::run_cli(argc, argv); }
