#include "qkp/cli.hpp"

int main(int argc, char** argv) { return qkp::cli_main(argc, argv); }
