#include "spar/run.hpp"

int main(int argc, char** argv) { return spar::run_cli(argc, argv); }
