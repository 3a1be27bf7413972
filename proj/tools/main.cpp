#include "commentguard/cli.hpp"

int main(int argc, char** argv) { return commentguard::cli::run(argc, argv); }
