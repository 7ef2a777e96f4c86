#include "vrjp/cli.hpp"

int main(int argc, char** argv) { return vrjp::run_cli(argc, argv); }
