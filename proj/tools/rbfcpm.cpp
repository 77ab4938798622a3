#include "rbfcpm/cli.hpp"

int main(int argc, char** argv) { return rbfcpm::run_cli(argc, argv); }
