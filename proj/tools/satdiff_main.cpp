#include "satdiff/cli.hpp"

int main(int argc, char** argv) { return satdiff::cli::dispatch(argc, argv); }
