#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metava::cli {

enum ExitCode : int {
  ok = 0,
  usage = 1,           // bad flags or configuration
  data_unreadable = 2,
  non_finite = 3,      // training aborted; the last good checkpoint is kept
  checkpoint_error = 4 // missing, damaged or not matching the model
};

// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metava::cli
