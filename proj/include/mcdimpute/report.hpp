#ifndef MCDIMPUTE_REPORT_HPP
#define MCDIMPUTE_REPORT_HPP

#include <filesystem>
#include <string>

#include "mcdimpute/eval.hpp"

namespace mcdi {

/// Resolved settings that influence results, one `key = value` line each.
/// The output is a valid config file for the CLI's --config option. Thread
/// count and output location are left out since they do not change results.
std::string describe_config(const ExperimentConfig& cfg);

/// Result tables: one RMSE table and one delta-acc table per missing
/// rate, rows per model, columns per dataset, RMSE cells as mean[std] with 5
/// decimals. The lowest RMSE in each column is marked with '*'.
std::string format_tables(const EvalReport& report, const ExperimentConfig& cfg);

/// Every number of the report, `key=value` per line, full precision.
std::string format_dump(const EvalReport& report, const ExperimentConfig& cfg);

/// Writes report.txt, results.kv and config.toml into `dir`.
void write_report(const std::filesystem::path& dir, const EvalReport& report, const ExperimentConfig& cfg);

}  // namespace mcdi

#endif  // MCDIMPUTE_REPORT_HPP
