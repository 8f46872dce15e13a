#include <iostream>

#include "tspkit/cli.hpp"

int main(int argc, char** argv) { return tspkit::cli::run(argc, argv, std::cout, std::cerr); }
