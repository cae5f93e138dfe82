#include <iostream>

#include "cgmm/commands.hpp"

int main(int argc, char** argv) { return cgmm::run_cli(argc, argv, std::cout, std::cerr); }
