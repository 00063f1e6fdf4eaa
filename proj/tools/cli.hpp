#pragma once

#include <iosfwd>

namespace psf::cli {

/// Exit codes of the psfcs command.
inline constexpr int kOk = 0;
inline constexpr int kVerificationFailed = 1;  // not equivalent, shutdown violated, truncated LTS
inline constexpr int kUsageError = 2;          // bad arguments, parse/link diagnostics, I/O errors

/// Runs one psfcs command. Artifacts go to `out`, diagnostics to `err`;
/// interactive simulation reads commands from `in`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace psf::cli
