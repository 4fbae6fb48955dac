#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gnnlink::cli {

enum ExitStatus : int { kSuccess = 0, kUsageError = 1, kDataError = 2, kNumericError = 3 };

/// Every knob of every subcommand. Config files use the same names as the long flags
/// (`learning_rate = 0.02`); flags given on the command line win.
struct RunConfig {
  // inputs
  std::string survey;
  std::string products;
  std::string schema;
  std::string model;
  std::string codec;
  std::string adjacency;  // edge list u,v
  std::string manifest;   // node ids for `adjacency` / `truth`
  std::string predictions;
  std::string truth;
  // outputs
  std::string out_dir = ".";

  std::uint32_t cutoff = 1;
  double test_fraction = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_size = 20;
  double learning_rate = 0.02;
  double dropout = 0.3;
  std::vector<std::size_t> hidden = {20, 20};
  std::vector<std::size_t> samples = {20, 10};
  std::string edge_operator = "inner_product";
  std::size_t knn_k = 0;  // 0 = derived from the training network
  double threshold = 0.5;
  std::size_t repeats = 50;
  std::string importance_data = "train";
  std::uint64_t seed = 0;

  // synth
  std::size_t synth_products = 400;
  std::size_t synth_customers = 40000;
  double synth_temperature = -1.0;  // < 0 = preset value
  double synth_overlap = 0.74;

  /// Fingerprint of every field except out_dir, embedded in emitted artifacts.
  std::string hash() const;
};

inline constexpr std::string_view kCommands[] = {"build-network", "train",      "predict",
                                                 "evaluate",      "importance", "synth"};

/// Runs one subcommand, writing artifacts under config.out_dir and progress to `log`.
/// Library exceptions map to exit statuses; nothing propagates.
int run_command(std::string_view command, const RunConfig& config, std::ostream& log);

struct ParsedCommandLine {
  std::string command;
  RunConfig config;
  int exit_status = -1;  // >= 0 when parsing already finished the process (help, error)
};

/// CLI11 front end shared by the executable and the tests.
ParsedCommandLine parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gnnlink::cli
