#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pointqa {

// Exit status: 0 success, 1 expected failure (message on err), 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace pointqa
