#include <vector>

#include "pbir/cli.hpp"

int main(int argc, char** argv) {
    return pbir::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
