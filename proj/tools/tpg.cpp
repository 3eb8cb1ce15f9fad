#include "tpg/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tpg::run_cli(argc, argv, std::cout, std::cerr); }
