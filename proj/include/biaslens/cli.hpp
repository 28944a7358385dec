#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace biaslens {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

/// Entry point of the `biaslens` command. `args` excludes the program name.
/// Primary output goes to `out` (or --out); diagnostics go to `err` with an
/// `E:<category>:` or `W:<category>:` prefix.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace biaslens
