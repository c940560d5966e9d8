#include "malfam/cli.hpp"

int main(int argc, char** argv) { return malfam::run(argc, argv); }
