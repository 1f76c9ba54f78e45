#ifndef ETO_CLI_HPP_
#define ETO_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace eto::cli {

inline constexpr const char* kVersion = "eto 0.1.0";

// Exit codes: 0 success, 1 runtime failure, 2 usage or path error.
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses argv and runs the selected subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Runs `command` with fully resolved arguments, writes its outputs plus
// `<command>.manifest.json` into args["out"], and returns the manifest.
nlohmann::json execute(const std::string& command, const nlohmann::json& args, std::ostream& log);

// Re-runs the command recorded in a run manifest; `out_dir` overrides the
// recorded output directory when non-empty.
nlohmann::json replay(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                      std::ostream& log);

}  // namespace eto::cli

#endif  // ETO_CLI_HPP_
