#ifndef ERPCA_CLI_HPP
#define ERPCA_CLI_HPP

namespace erpca {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitCapsNotMet = 4;

int run_cli(int argc, char** argv);

}  // namespace erpca

#endif  // ERPCA_CLI_HPP
