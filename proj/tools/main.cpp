#include <string>
#include <vector>

#include "cpnet/config.hpp"

int main(int argc, char** argv) {
    return cpnet::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
