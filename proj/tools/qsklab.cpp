#include <iostream>

#include "qsklab/cli.hpp"

int main(int argc, char** argv) { return qsklab::run_cli(argc, argv, std::cout, std::cerr); }
