#pragma once

#include <functional>
#include <iosfwd>

namespace imt::cli {

/// Entry point of the `imt` tool. Returns the process exit code: 0 on
/// success, 1 when a command fails, 2 on a usage error. Diagnostics are one
/// line on `err`. `env` looks up environment variables.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::function<const char*(const char*)>& env);

}  // namespace imt::cli
