#include <iostream>

#include "cvlbi/cli.hpp"

int main(int argc, char** argv) { return cvlbi::cli::run(argc, argv, std::cout, std::cerr); }
