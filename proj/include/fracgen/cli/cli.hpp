#pragma once

#include <iosfwd>

namespace fracgen::cli {

/// Runs one command line in-process and returns the process exit code:
/// 0 success, 1 malformed config or arguments, 2 missing input files,
/// 3 numerical abort. Commands write their data outputs plus a
/// run_manifest.json into the output directory.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fracgen::cli
