#include <iostream>

#include "mfspde/cli.hpp"

int main(int argc, char** argv) { return mfspde::cli_main(argc, argv, std::cout, std::cerr); }
