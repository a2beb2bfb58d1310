#pragma once

namespace stes::cli {

/// Parses argv and dispatches to a subcommand. Returns a process exit code:
/// 0 on success, 2 config, 3 data, 4 numeric, 5 I/O failures.
int run(int argc, char** argv);

}  // namespace stes::cli
