#include "narex/cli.hpp"

int main(int argc, char** argv) { return narex::run_cli(argc, argv); }
