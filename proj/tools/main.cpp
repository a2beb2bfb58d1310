#include "commands.hpp"

int main(int argc, char** argv) { return stes::cli::run(argc, argv); }
