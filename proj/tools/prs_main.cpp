#include "prs/cli.hpp"

int main(int argc, char** argv) { return prs::cli_main(argc, argv); }
