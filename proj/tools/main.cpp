#include <iostream>

#include "hierood/cli.hpp"

int main(int argc, char** argv) { return hierood::run_cli(argc, argv, std::cout, std::cerr); }
