#include "qshoot/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return qshoot::cli::run(argc, argv, std::cout, std::cerr);
}
