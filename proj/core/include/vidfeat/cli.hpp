#pragma once

namespace vidfeat {

// Full command-line entry point. Exit codes: 0 success, 1 usage error,
// 2 data/config error, 3 numeric failure.
int cli_main(int argc, const char* const* argv);

}  // namespace vidfeat
