#include "surgnn/cli.hpp"

int main(int argc, char** argv) { return surgnn::cli::run(argc, argv); }
