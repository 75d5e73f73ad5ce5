#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nmtadv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// key = value lines; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path);

}  // namespace nmtadv::cli
