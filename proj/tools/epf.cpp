#include <iostream>

#include "epf/pipeline.hpp"

int main(int argc, char** argv) {
    return epf::run_cli(argc, argv, std::cout, std::cerr);
}
