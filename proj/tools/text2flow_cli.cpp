#include <iostream>

#include "text2flow/cli.hpp"

int main(int argc, char** argv) { return text2flow::cli::main(argc, argv, std::cout, std::cerr); }
