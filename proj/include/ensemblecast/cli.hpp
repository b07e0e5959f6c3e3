#pragma once

namespace ecast {

/// Entry point of the ecast tool. Returns the process exit status: 0 on
/// success, 1 on operational failure (diagnostic on stderr), 2 on usage
/// errors.
int run_cli(int argc, const char* const* argv);

}  // namespace ecast
