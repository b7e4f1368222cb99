#include "rhythm/cli.hpp"

int main(int argc, char** argv) { return rhythm::cli::run(argc, argv); }
