#include "qstab/cli.hpp"

int main(int argc, char** argv) { return qstab::cli::run_cli(argc, argv); }
