// Command-line front end: config resolution (flags > config file > defaults),
// subcommand dispatch, and deterministic output files under --out.
#pragma once

#include <string>
#include <vector>

namespace habmec::cli {

// Runs the tool with command-line arguments (argv[0] excluded). Returns the
// process exit code: 0 success, 1 validation/usage error, 2 internal failure.
int run_main(const std::vector<std::string>& args);

}  // namespace habmec::cli
