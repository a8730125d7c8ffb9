#include <iostream>

#include "cuebias/cli.hpp"

int main(int argc, char** argv) { return cuebias::cli::run(argc, argv, std::cout, std::cerr); }
