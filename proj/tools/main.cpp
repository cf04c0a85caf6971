#include "yieldfusion/cli.hpp"

int main(int argc, char** argv) { return yf::run_cli(argc, argv); }
