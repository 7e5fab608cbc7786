#include "stopgame/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return stopgame::cli_main(argc, argv, std::cout, std::cerr); }
