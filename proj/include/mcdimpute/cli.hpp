#ifndef MCDIMPUTE_CLI_HPP
#define MCDIMPUTE_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "mcdimpute/eval.hpp"

namespace mcdi::cli {

struct ImputeOptions {
  std::string model_file;  // trained model to load
  std::string train_data;  // CSV to train on when no model file is given
  std::string std_out;     // uncertainty side file; default <out>.std.csv
  bool normalized = false; // write [0,1] values instead of original units
};

struct Invocation {
  std::string command;  // impute, reproduce or train
  ExperimentConfig config;
  bool models_given = false;
  ImputeOptions impute;
};

/// Parses flags (and an optional --config file; flags win over file values,
/// file values over defaults). Throws UsageError naming the offending key.
Invocation parse_config(const std::vector<std::string>& args);

int cmd_reproduce(const ExperimentConfig& cfg, std::ostream& out);
int cmd_train(const Invocation& inv, std::ostream& out);
int cmd_impute(const Invocation& inv, std::ostream& out);

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcdi::cli

#endif  // MCDIMPUTE_CLI_HPP
