#include <iostream>

#include "eqcl/cli.hpp"

int main(int argc, char** argv) {
    return eqcl::cli_main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
