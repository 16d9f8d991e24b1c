#include "mtbandit/cli.hpp"

int main(int argc, char** argv) { return mtbandit::run_cli(argc, argv); }
