#include "sbd/cli/commands.hpp"

int main(int argc, char** argv) { return sbd::cli::run(argc, argv); }
