#include "rde/cli.hpp"

int main(int argc, char** argv) { return rde::cli_main(argc, argv); }
