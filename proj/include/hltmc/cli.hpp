#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hltmc {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// 64-bit FNV-1a over a file's bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

/// Runs the command line. Exit codes: 0 success, 1 usage, 2 bad data,
/// 3 numerical degeneracy. Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace hltmc
