#include <iostream>
#include <string>
#include <vector>

#include "dutrpca/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dutrpca::run_cli(args, std::cout, std::cerr);
}
