#include "plr/cli.hpp"

int main(int argc, char** argv) { return plr::cli_main(argc, argv); }
