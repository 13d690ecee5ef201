#include "longmab/pipeline.hpp"

int main(int argc, char** argv) { return longmab::run_cli(argc, argv); }
