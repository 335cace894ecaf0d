#include "evofam/cli.hpp"

int main(int argc, char** argv) { return evofam::cli::run(argc, argv); }
