#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liouvlab/config.hpp"
#include "liouvlab/io.hpp"
#include "liouvlab/measures.hpp"

namespace liouvlab {

/// One declared tolerance and how the run fared against it.
struct Verdict {
  std::string name;
  std::string status;    // pass | fail | warn
  double measured = 0.0;
  std::string relation;  // "<=", ">=", ">", "=="
  double tolerance = 0.0;
  std::string note;
};

io::json verdict_to_json(const Verdict& v);

/// A numerical operation failed; `operation` names it.
class OperationError : public std::runtime_error {
 public:
  OperationError(std::string operation, const std::string& what)
      : std::runtime_error(what), operation(std::move(operation)) {}
  std::string operation;
};

struct ExperimentOutput {
  std::vector<io::json> records;  // results.json "records" and results.csv rows
  io::json summary = io::json::object();
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, std::string>> files;  // extra CSV artifacts
  std::optional<Ensemble> ensemble;                        // written by `sample`
};

/// Runs the experiment in memory; throws OperationError on numerical failure.
ExperimentOutput execute(const ExperimentConfig& config);

/// 1 if any verdict failed, else 0.
int verdict_exit_code(const std::vector<Verdict>& verdicts);

/// results.json content (no timestamps; deterministic for a given config).
std::string results_json(const ExperimentConfig& config, const ExperimentOutput& out);

/// Executes, writes manifest.json, results.json, results.csv, verdicts.csv
/// and any extra artifacts into config.out, and logs one line per verdict.
/// Returns 0 (no fail), 1 (some verdict failed) or 3 (runtime failure).
int run(const ExperimentConfig& config, std::ostream& log);

}  // namespace liouvlab
