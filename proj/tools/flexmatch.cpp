#include "flexmatch/cli.hpp"

int main(int argc, char** argv) { return flexmatch::cli::run(argc, argv); }
