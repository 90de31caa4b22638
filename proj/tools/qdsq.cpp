#include <iostream>

#include "qdsq/cli.hpp"

int main(int argc, char** argv) { return qdsq::run_cli(argc, argv, std::cout, std::cerr); }
