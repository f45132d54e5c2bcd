#pragma once

#include <ostream>

namespace pvc {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitIo = 3 };

// Entry point of the `pvc` tool. Subcommands: forward, compress, check-causality,
// check-init-identity, grad-check, budget, pipeline.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pvc
