#include <iostream>
#include <string>
#include <vector>

#include "prmix/app/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return prmix::app::run(args, std::cout, std::cerr);
}
