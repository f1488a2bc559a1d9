#include <iostream>

#include "gmrt/cli.hpp"

int main(int argc, char** argv) { return gmrt::run_cli(argc, argv, std::cout, std::cerr); }
