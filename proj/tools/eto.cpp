#include <iostream>

#include "eto/cli.hpp"

int main(int argc, char** argv) { return eto::cli::run(argc, argv, std::cout, std::cerr); }
