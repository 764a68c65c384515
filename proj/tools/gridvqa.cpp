#include <iostream>
#include <string>
#include <vector>

#include "gridvqa/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return gridvqa::cli::run(args, std::cout, std::cerr);
}
