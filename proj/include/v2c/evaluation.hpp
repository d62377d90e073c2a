#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "v2c/data.hpp"
#include "v2c/metrics.hpp"
#include "v2c/model.hpp"

namespace v2c {

// One line of the evaluation dump.
struct EvalRow {
  std::string clip_id;
  std::string reference_command;
  std::string generated_command;
  std::string reference_action;
  std::string action_from_translation;
  std::string action_from_classification;  // empty for the EDNet baseline
};

struct EvalOutcome {
  metrics::EvalReport report;
  std::vector<EvalRow> rows;
  std::vector<metrics::EvalPair> pairs;
};

// Runs inference on every clip and scores the decoded commands. Action success
// is computed from the command verb and, in joint mode, from the classifier.
EvalOutcome evaluate_all(V2CParams& model, const std::vector<LoadedClip>& clips);

// TSV: clip_id, reference command, generated command, reference action,
// action from translation, action from classification.
void write_eval_dump(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

// Table-style report with three decimals.
std::string format_report(const metrics::EvalReport& report);

}  // namespace v2c
