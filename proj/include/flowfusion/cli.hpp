#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace flowfusion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitDegraded = 2;

struct RunOptions {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> synthetic_spec;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> flow;  ///< exact | builtin | dir:<path>
  bool no_segmentation = false;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_outer_iters;
  /// Original command line, echoed into the manifest.
  std::vector<std::string> command_line;
};

struct EvalOptions {
  std::filesystem::path estimate;
  std::filesystem::path ground_truth;
  double delta = 1.0;
  std::filesystem::path out = ".";
};

struct SynthOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

/// Each command reports to `out` / `err` and returns a process exit code.
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err);

/// CLI11 front end shared by the binary and the tests.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowfusion::cli
