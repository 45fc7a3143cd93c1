#include "sievei/cli.hpp"

int main(int argc, char** argv) { return sievei::run_cli(argc, argv); }
