#include <iostream>

#include "rbt/pipeline.hpp"

int main(int argc, char** argv) { return rbt::run_cli(argc, argv, std::cout, std::cerr); }
