#include "cli.hpp"

int main(int argc, char** argv) { return geomancer::cli::dispatch(argc, argv); }
