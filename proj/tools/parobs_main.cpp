#include "parobs/cli.hpp"

int main(int argc, char** argv) { return parobs::cli_main(argc, argv); }
