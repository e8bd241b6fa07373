#include "pointqa/cli.hpp"

int main(int argc, char** argv) { return pointqa::run(argc, argv); }
