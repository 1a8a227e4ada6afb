#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "metaopt/dataset.hpp"
#include "metaopt/engine.hpp"
#include "metaopt/forward.hpp"
#include "metaopt/metrics.hpp"
#include "metaopt/pipeline.hpp"

namespace metaopt {

struct EvaluationReport {
  std::vector<std::pair<std::size_t, double>> per_example;  // (index, score)
  double mean_score = 0.0;
  long long n_evaluated = 0;
  std::vector<std::size_t> failed;  // indices whose forward raised (scored 0)

  bool any_failed() const { return !failed.empty(); }
};

// Runs the program over every example of the named split and scores each
// prediction. Work fans out over up to `parallelism` threads; the report
// lists per-example scores in dataset-index order, so the mean is
// independent of scheduling. A forward error scores 0 and flags the index
// instead of aborting the loop.
EvaluationReport evaluate_program(const Program& program,
                                  const TaskDataset& dataset,
                                  const std::string& split_name,
                                  const Metric& metric, Engine& engine,
                                  int parallelism = 1,
                                  const ForwardOptions& options = {});

}  // namespace metaopt
