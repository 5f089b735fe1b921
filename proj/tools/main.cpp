#include "backaction/commands.hpp"

int main(int argc, char** argv) { return backaction::run_cli(argc, argv); }
