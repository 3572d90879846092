#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace betamask::cli {

/// Bad flags or unusable inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one subcommand. `args` excludes the program name. Returns the exit
/// code: 0 success, 1 runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace betamask::cli
