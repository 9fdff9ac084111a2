#include "flexreg/cli.hpp"

int main(int argc, char** argv) { return flexreg::cli::run(argc, argv); }
