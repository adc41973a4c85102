#include "wesar/cli.hpp"

int main(int argc, char** argv) { return wesar::run_cli(argc, argv); }
