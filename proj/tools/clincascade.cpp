#include <iostream>

#include "clincascade/cli.hpp"

int main(int argc, char** argv) { return clincascade::cli::run(argc, argv, std::cout, std::cerr); }
