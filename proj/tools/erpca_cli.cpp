#include "erpca/cli.hpp"

int main(int argc, char** argv) { return erpca::run_cli(argc, argv); }
