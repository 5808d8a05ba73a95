#pragma once

#include <string>
#include <vector>

namespace bbm {

// Full command-line surface; args exclude the program name.  Returns the
// process exit code: 0 success, 2 configuration or usage problem, 3 resource
// exhaustion or numerical breakdown.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace bbm
