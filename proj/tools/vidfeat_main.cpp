#include "vidfeat/cli.hpp"

int main(int argc, char** argv) { return vidfeat::cli_main(argc, argv); }
