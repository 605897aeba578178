#include "coarse/cli.hpp"

int main(int argc, char** argv) { return coarse::cli::main(argc, argv); }
