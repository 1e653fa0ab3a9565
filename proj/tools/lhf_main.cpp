#include "commands.hpp"

int main(int argc, char** argv) { return lhf::cli::run(argc, argv); }
