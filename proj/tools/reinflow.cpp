#include "reinflow/harness/cli.hpp"

int main(int argc, char** argv) { return reinflow::harness::run_command(argc, argv); }
