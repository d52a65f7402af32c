#include <iostream>

#include "countryguess/cli.hpp"

int main(int argc, char** argv) { return countryguess::run_cli(argc, argv, std::cout, std::cerr); }
