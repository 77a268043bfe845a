#include <vector>

#include "samlab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return samlab::cli::run(args);
}
