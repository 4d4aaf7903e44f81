#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

namespace sgdperf {

/// Seed base used when --seed is not given.
inline constexpr std::uint64_t kDefaultSeed = 20180101;

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitModelError = 2;

/// Entry point of the `sgdperf` tool. `args` excludes the program name.
/// Diagnostics go to `err` as a single line; summaries go to `out`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sgdperf
