#include <iostream>
#include <string>
#include <vector>

#include "cfder/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cfder::run_cli(args, std::cout, std::cerr);
}
