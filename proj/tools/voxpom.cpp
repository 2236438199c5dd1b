#include "voxpom/cli.hpp"

int main(int argc, char** argv) { return voxpom::cli::run(argc, argv); }
