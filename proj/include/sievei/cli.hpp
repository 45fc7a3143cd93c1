#pragma once

namespace sievei {

// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace sievei
