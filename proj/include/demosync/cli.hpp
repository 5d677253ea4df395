#pragma once

namespace demosync {

// Full command-line entry point. Returns the process exit code: 0 success,
// 1 domain error (one "ERROR <code> <context>" line on stderr), 2 usage
// error. Never throws.
int cli_dispatch(int argc, char** argv);

}  // namespace demosync
