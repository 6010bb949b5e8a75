#include <iostream>

#include "faceqa/pipeline.hpp"

int main(int argc, char** argv) { return faceqa::run_cli(argc, argv, std::cout, std::cerr); }
