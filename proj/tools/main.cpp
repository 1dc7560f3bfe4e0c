#include "obstacle/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return obstacle::cli::run(argc, argv, std::cout, std::cerr); }
