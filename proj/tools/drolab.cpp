#include <iostream>

#include "drolab/harness.hpp"

int main(int argc, char** argv) { return drolab::run_cli(argc, argv, std::cout, std::cerr); }
