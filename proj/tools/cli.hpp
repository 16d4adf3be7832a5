#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entailnet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

/// Runs one subcommand. `args` excludes the program name. Reads "-" inputs
/// from `in`, writes "-" outputs to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace entailnet::cli
