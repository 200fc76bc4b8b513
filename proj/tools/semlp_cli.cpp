#include <iostream>
#include <string>
#include <vector>

#include "semlp/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return semlp::run_cli(args, std::cout, std::cerr);
}
