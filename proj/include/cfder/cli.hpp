#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfder {

/// Runs one command-line invocation (arguments without the program name).
/// Results go to `out`, diagnostics to `err`. Exit codes: 0 success (for
/// `equiv`: equivalent; for `member`: nonzero coefficient), 1 negative result
/// (inequivalent, zero coefficient, or a failed check), 2 unknown
/// (equivalence search gave up), 3 usage, parse, or input errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Canonical texts of the built-in demo systems, also shipped under corpus/.
const char* demo_input_text(const std::string& name);

}  // namespace cfder
