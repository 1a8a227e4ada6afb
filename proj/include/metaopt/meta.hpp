#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metaopt/dataset.hpp"
#include "metaopt/engine.hpp"
#include "metaopt/optimizer.hpp"

namespace metaopt {

// Which meta-optimizer drives an outer loop: prompt refinement of one
// optimizer, or structural composition of several.
enum class MetaKind { meta_prompt, meta_structure };

const char* to_string(MetaKind kind);
MetaKind meta_kind_from_string(const std::string& text);

// State of one outer loop. best_optimizer is always drawn from the
// inputs or the proposals; best_score never decreases.
struct MetaState {
  OptimizerSpec best_optimizer;
  double best_score = 0.0;
  Program best_program;  // program behind best_score, for artifact output
  std::vector<OptimizerSpec> input_optimizers;
  std::vector<double> input_scores;  // aligned with input_optimizers
  std::vector<ProposalRecord> history;
};

struct OuterLoopOptions {
  MetaKind kind = MetaKind::meta_prompt;
  int meta_iterations = 3;  // proposal rounds J
  double meta_temperature = 1.0;
  InnerLoopOptions inner;             // carries I, metric, engines, seed, log
  Engine* meta_engine = nullptr;
};

struct OuterLoopResult {
  OptimizerSpec best_optimizer;
  double best_score = 0.0;
  Program best_program;
  std::vector<ProposalRecord> history;
};

// Runs one inner loop with M and records its score as the incumbent —
// evaluate-first initialization, honoring inner.eager_init for the
// pessimistic variant that starts the incumbent at 0.
MetaState meta_prompt_initialize(const TaskDataset& dataset,
                                 const OptimizerSpec& optimizer,
                                 const Program& program,
                                 const OuterLoopOptions& options);

// Samples one training example and asks the meta engine for an improved
// optimizer task description; returns a copy of the current best with
// the new description, or nothing after 3 failed re-asks.
std::optional<OptimizerSpec> meta_prompt_propose(MetaState& state,
                                                 const TaskDataset& dataset,
                                                 const OuterLoopOptions& options,
                                                 int meta_iteration);

// Runs one inner loop per input optimizer and keeps the argmax (first
// among ties) as the incumbent.
MetaState meta_structure_initialize(const TaskDataset& dataset,
                                    const std::vector<OptimizerSpec>& inputs,
                                    const Program& program,
                                    const OuterLoopOptions& options);

// Asks the meta engine for a composite schedule over the input
// optimizers' strategies. Per-phase prompts resolve at proposal time:
// explicit override, else the best-scoring input of that strategy, else
// the built-in default optimizer prompt.
std::optional<OptimizerSpec> meta_structure_propose(
    MetaState& state, const OuterLoopOptions& options, int meta_iteration);

// Strict-improvement update of the meta state; history appended either way.
void meta_update(MetaState& state, const OptimizerSpec& proposal, double score,
                 const Program& program, const std::string& summary);

// The outer loop: initialize per kind, then J rounds of propose /
// inner-loop / update. Proposal skips leave the state untouched. Returns
// the incumbent optimizer (the initialization best when nothing improved).
OuterLoopResult run_outer_loop(const std::vector<OptimizerSpec>& inputs,
                               const Program& program,
                               const TaskDataset& dataset,
                               const OuterLoopOptions& options);

struct TwoStageResult {
  OuterLoopResult final;                 // stage-2 outcome
  std::vector<OuterLoopResult> stage1;   // per-input prompt refinement
};

// Two-stage meta-optimization: refine each input optimizer's task
// description independently, then search compositions of the refined
// variants. When stage 2 never beats the best variant, that variant is
// returned unchanged.
TwoStageResult run_two_stage(const std::vector<OptimizerSpec>& inputs,
                                const Program& program,
                                const TaskDataset& dataset,
                                const OuterLoopOptions& options);

}  // namespace metaopt
