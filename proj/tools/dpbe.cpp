#include <iostream>

#include "dpbe/cli.hpp"

int main(int argc, char** argv) { return dpbe::run_cli(argc, argv, std::cout, std::cerr); }
