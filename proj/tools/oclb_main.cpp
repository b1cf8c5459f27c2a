#include "oclb/harness.hpp"

int main(int argc, char** argv) { return oclb::cli_main(argc, argv); }
