#include <iostream>

#include "flowfusion/cli.hpp"

int main(int argc, char** argv) { return flowfusion::cli::main_entry(argc, argv, std::cout, std::cerr); }
