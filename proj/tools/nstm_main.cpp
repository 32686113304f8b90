#include "nstm/cli.hpp"

int main(int argc, char** argv) { return nstm::cli_dispatch(argc, argv); }
