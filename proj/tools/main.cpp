#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return epitrace::cli::run(argc, argv, std::cout, std::cerr);
}
