#ifndef POINCARE_TOOLS_APP_HPP_
#define POINCARE_TOOLS_APP_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace poincare::cli {

// Exit codes: 0 success, 1 pipeline failure, 2 usage or input error.
// `args` excludes the program name. Library errors are reported on `err`
// as one JSON object {"error": code, "message": text}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace poincare::cli

#endif  // POINCARE_TOOLS_APP_HPP_
