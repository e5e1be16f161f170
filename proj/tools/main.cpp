#include "runner.hpp"

#include <iostream>

int main(int argc, char** argv) { return hmfg::cli::run(argc, argv, std::cout, std::cerr); }
