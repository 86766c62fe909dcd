#pragma once

namespace nelf {

// Entry point for the `nelfav` binary. Exit codes: 0 success, 2 validation
// error, 3 I/O error, 4 checkpoint/config incompatibility.
int run_cli(int argc, const char* const* argv);

}  // namespace nelf
