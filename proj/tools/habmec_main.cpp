#include <string>
#include <vector>

#include "habmec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return habmec::cli::run_main(args);
}
