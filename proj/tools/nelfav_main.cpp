#include "nelf/cli.hpp"

int main(int argc, char** argv) { return nelf::run_cli(argc, argv); }
