#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace vlab::cli {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  nlohmann::json results = nlohmann::json::object();
  std::map<std::string, Table> tables;
  std::map<std::string, double> summary;
  std::vector<std::string> warnings;
};

/// %.17g, so values round-trip exactly.
std::string format_number(double v);

/// Runs the experiment named by `command` of a resolved config.
Report run_experiment(const nlohmann::json& resolved);

/// CSV with a leading config_hash column on every record.
std::string to_csv(const Table& table, const std::string& hash);

/// Runs and writes <tag>.json and <tag>_<table>.csv under `out_dir`.
/// Returns 0 on success, 2 for invalid input, 3 for numerical failure.
int run_and_write(const nlohmann::json& resolved, const std::string& out_dir, bool verbose);

}  // namespace vlab::cli
