#include "f3m/cli.hpp"

int main(int argc, char** argv) { return f3m::run_cli(argc, argv); }
