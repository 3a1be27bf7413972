#pragma once

#include <string>
#include <vector>

namespace commentguard::cli {

/// Entry point for the `commentguard` tool. Returns the process exit status:
/// 0 when every output was written, nonzero otherwise.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace commentguard::cli
