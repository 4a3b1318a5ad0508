#include "cmib/cli/cli.hpp"

int main(int argc, char** argv) { return cmib::cli::dispatch(argc, argv); }
