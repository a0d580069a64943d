#include <fst/cli.hpp>

int main(int argc, char** argv) { return fst::cli_main(argc, argv); }
