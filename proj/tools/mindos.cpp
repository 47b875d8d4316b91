#include "mindos/service.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return mindos::cli_dispatch(args, std::cin, std::cout, std::cerr);
}
