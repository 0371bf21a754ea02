#pragma once

namespace niso::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point of the `niso` tool. Subcommands: train, eval, export,
/// gradcheck, gen-data.
int run(int argc, char** argv);

}  // namespace niso::cli
