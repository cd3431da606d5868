#include <iostream>

#include "semcom_cli/cli.hpp"

int main(int argc, char** argv) { return semcom::cli::main_entry(argc, argv, std::cout, std::cerr); }
