#include "persona/cli.hpp"

int main(int argc, char** argv) { return persona::run_cli(argc, argv); }
