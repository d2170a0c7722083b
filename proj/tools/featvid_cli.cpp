#include "featvid/cli.hpp"

int main(int argc, char** argv) { return featvid::run_cli(argc, argv); }
