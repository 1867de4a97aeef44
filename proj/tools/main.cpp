#include "quadtv/cli.hpp"

int main(int argc, char** argv) { return quadtv::cli::run(argc, argv); }
