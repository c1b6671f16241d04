#pragma once

namespace geomancer::cli {

/// Runs one `geomancer` subcommand. Returns the process exit code:
/// 0 on success, 1 when a pipeline stage fails, 2 on usage or config errors.
int dispatch(int argc, const char* const* argv);

}  // namespace geomancer::cli
