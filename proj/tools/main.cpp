#include <iostream>

#include "shadow_ode/cli.hpp"

int main(int argc, char** argv) { return shadow_ode::cli::main(argc, argv, std::cout, std::cerr); }
