#include "ensemblecast/cli.hpp"

int main(int argc, char** argv) { return ecast::run_cli(argc, argv); }
