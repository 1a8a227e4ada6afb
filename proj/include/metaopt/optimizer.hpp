#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaopt/dataset.hpp"
#include "metaopt/engine.hpp"
#include "metaopt/events.hpp"
#include "metaopt/evaluate.hpp"
#include "metaopt/metrics.hpp"
#include "metaopt/pipeline.hpp"
#include "metaopt/text_variable.hpp"

namespace metaopt {

// How an optimizer searches program space: prompt editing, structure
// proposals, or a composite schedule sequencing both.
enum class Strategy { prompt_tgd, structure_search, composite_schedule };

const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& text);

// One phase of a composite schedule: apply `strategy` for `repeats`
// consecutive steps, optionally under its own optimizer prompt.
struct SchedulePhase {
  Strategy strategy = Strategy::prompt_tgd;
  int repeats = 1;
  std::string prompt_override;

  friend bool operator==(const SchedulePhase&, const SchedulePhase&) = default;
};

inline constexpr int kMaxSchedulePhases = 4;

// An optimizer M: a strategy plus its learnable task description (the
// parameter the meta level edits), and — for composites — the phase
// schedule.
struct OptimizerSpec {
  std::string name = "optimizer";
  Strategy strategy = Strategy::prompt_tgd;
  TextVariable optimizer_prompt;
  std::vector<SchedulePhase> schedule;  // composite_schedule only

  // Throws ConfigError on a malformed spec (empty/oversized schedule,
  // nested composite, non-positive repeats, non-learnable prompt).
  void validate() const;

  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

OptimizerSpec default_tgd_optimizer();
OptimizerSpec default_structure_optimizer();

nlohmann::ordered_json optimizer_spec_to_json(const OptimizerSpec& spec);
OptimizerSpec optimizer_spec_from_json(const nlohmann::json& doc);
std::string serialize_optimizer(const OptimizerSpec& spec);
OptimizerSpec deserialize_optimizer(const std::string& text);

struct ProposalRecord {
  std::string summary;
  double score = 0.0;
  bool accepted = false;
};

// Mutable state of one inner optimization run. best_score is the maximum
// score any update has seen (or the baseline), and never decreases.
struct OptimizerState {
  OptimizerSpec spec;
  Program best_program;
  double best_score = 0.0;
  double baseline_score = 0.0;
  bool lazy_init = false;  // baseline evaluation skipped; best_score == 0
  std::vector<ProposalRecord> history;
  int iteration = 0;  // 1-based during the loop
};

struct InnerLoopOptions {
  int iterations = 6;  // proposal rounds I
  Metric metric;
  int parallelism = 1;
  // Evaluate the starting program before optimizing (the documented
  // behavior); when false the baseline is recorded as 0 and only
  // proposals can become the incumbent.
  bool eager_init = true;
  std::uint64_t seed = 0;
  int failure_sample = 3;  // failures fed to each feedback call
  Engine* program_engine = nullptr;   // forward + evaluation calls
  Engine* optimizer_engine = nullptr; // proposal calls
  EventLog* log = nullptr;            // optional
};

struct InnerLoopResult {
  Program best_program;
  double best_score = 0.0;
  double baseline_score = 0.0;
  std::vector<ProposalRecord> history;
  bool all_rejected = false;  // no proposal survived in any iteration
};

// Picks the evaluation split per the loop convention: "val" when
// non-empty, otherwise "train".
const std::string& evaluation_split(const TaskDataset& dataset);

// Prepares the loop state. Throws ConfigError when the train split is
// empty or the program is invalid.
OptimizerState initialize(const OptimizerSpec& spec, const TaskDataset& dataset,
                          const Program& program,
                          const InnerLoopOptions& options);

// Feedback-then-edit prompt proposal: one optimizer-level call critiques
// sampled training failures, a second rewrites the chosen slot between
// <improved></improved> markers. Returns nothing when the edit response
// stays unparseable after 3 re-asks; the state is untouched either way.
std::optional<Program> propose_tgd(OptimizerState& state,
                                   const OptimizerSpec& spec,
                                   const TaskDataset& dataset, Engine& engine,
                                   const InnerLoopOptions& options);

// Whole-pipeline proposal: one optimizer-level call receives the current
// best program document, recent history, and the document grammar, and
// must reply with a new pipeline document (≥1 llm_call, valid graph).
std::optional<Program> propose_structure(OptimizerState& state,
                                         const OptimizerSpec& spec,
                                         Engine& engine,
                                         const InnerLoopOptions& options);

// Strict-improvement update: score > best_score replaces the incumbent;
// ties and losses keep it. Appends to history either way.
void update(OptimizerState& state, const Program& proposal, double score,
            const std::string& summary);

// The inner loop: initialize, then I rounds of propose / evaluate /
// update, returning the best program and score. Composite schedules
// dispatch the strategy of each round by phase position.
InnerLoopResult run_inner_loop(const OptimizerSpec& spec,
                               const Program& program,
                               const TaskDataset& dataset,
                               const InnerLoopOptions& options);

}  // namespace metaopt
