#include <string>
#include <vector>

#include "invkern/cli_app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return invkern::cli::run_cli(std::move(args));
}
