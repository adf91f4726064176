#include "hltmc/cli.hpp"

int main(int argc, char** argv) { return hltmc::run(argc, argv); }
