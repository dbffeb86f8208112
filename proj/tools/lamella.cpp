#include <vector>

#include "lamella/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lamella::cli::dispatch(std::move(args));
}
