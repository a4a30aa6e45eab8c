#include "cli.hpp"

int main(int argc, char** argv) { return granorm::cli::run(argc, argv); }
