#pragma once

// `mmgr <noun> <verb>`: one subcommand per operation-table entry, plus
// `serve`, `agent run` and `agent gen-csv`.

#include <iosfwd>
#include <string>
#include <vector>

namespace mmgr {

/// Exit codes: 0 success, 1 API error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "noun verb" of every command the CLI registers, operation-table ones and
/// local ones alike.
std::vector<std::string> cli_commands();

}  // namespace mmgr
