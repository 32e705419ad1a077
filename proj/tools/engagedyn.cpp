#include "engagedyn/cli.hpp"

int main(int argc, char** argv) { return engagedyn::cli::run(argc, argv); }
