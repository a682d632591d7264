#include "fde/cli.hpp"

int main(int argc, char** argv) { return fde::cli::run(argc, argv); }
