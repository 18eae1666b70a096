#include "setfeat/cli.hpp"

int main(int argc, char** argv) { return setfeat::run_cli(argc, argv); }
