#include "demosync/cli.hpp"

int main(int argc, char** argv) { return demosync::cli_dispatch(argc, argv); }
