// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace vpsde::cli {

// Runs one subcommand (sample, score-error, verify, covering, kl, mixing)
// with the given argv-style arguments (program name excluded). Returns the
// process exit status: 0 success, 1 invariant/verification failure or runtime
// error, 2 usage or config error.
int run(const std::vector<std::string>& args);

}  // namespace vpsde::cli
