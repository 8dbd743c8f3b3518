#include <iostream>

#include "ccplan/cli.hpp"

int main(int argc, char** argv) { return ccplan::cli::run(argc, argv, std::cout, std::cerr); }
