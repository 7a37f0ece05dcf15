#include "cli.hpp"

int main(int argc, char** argv) { return lt::cli::run(argc, argv); }
