#include "cli.hpp"

int main(int argc, char** argv) { return niso::cli::run(argc, argv); }
