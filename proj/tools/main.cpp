#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "factgap/cli.h"

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("factgap"));
    std::vector<std::string> args(argv + 1, argv + argc);
    return factgap::run_cli(args, std::cout, std::cerr);
}
