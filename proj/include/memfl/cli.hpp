#pragma once

#include <ostream>

#include "memfl/config.hpp"

namespace memfl {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitProvider = 2,
  kExitDegraded = 3,
};

/// Runs one `memfl` subcommand. Errors are printed to `err` as
/// `error[<Code>]: message`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
             const EnvLookup& env = system_env);

}  // namespace memfl
