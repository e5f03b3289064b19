#pragma once

#include <filesystem>

#include "satdiff/manifest.hpp"

namespace satdiff::cli {

/// Exit-code contract: 0 success, 1 verification failure, 2 config error,
/// 3 numerical abort.
inline constexpr int exit_ok = 0;
inline constexpr int exit_verify_failed = 1;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_numerical_abort = 3;

int cmd_run(const Manifest& m, const std::filesystem::path& out_dir);
int cmd_pair(const Manifest& a, const Manifest& b, const std::filesystem::path& out_dir);
int cmd_analyze(const Manifest& m, const std::filesystem::path& trajectory_path,
                const std::filesystem::path& out_dir);
int cmd_verify(const Manifest& m, const std::filesystem::path& trajectory_path,
               const std::filesystem::path& out_dir);
int cmd_sweep(const std::filesystem::path& sweep_path,
              const std::filesystem::path& out_dir);

/// Full argv entry point used by the satdiff tool.
int dispatch(int argc, const char* const* argv);

void write_ledger_csv(const std::filesystem::path& path, const EnergyLedger& ledger);
EnergyLedger read_ledger_csv(const std::filesystem::path& path);

}  // namespace satdiff::cli
