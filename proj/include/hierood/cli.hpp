#pragma once

#include <ostream>

namespace hierood {

// Entry point of the `hierood` tool. Returns the process exit code. Failures
// print one JSON object on a single line to `err`:
//   {"error":{"kind":"...","message":"..."}}
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hierood
