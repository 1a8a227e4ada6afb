#include "metaopt/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "metaopt/errors.hpp"

namespace metaopt {

EvaluationReport evaluate_program(const Program& program,
                                  const TaskDataset& dataset,
                                  const std::string& split_name,
                                  const Metric& metric, Engine& engine,
                                  int parallelism,
                                  const ForwardOptions& options) {
  const std::vector<std::size_t>& indices = dataset.split(split_name);
  if (indices.empty()) {
    throw ConfigError("split '" + split_name + "' is empty");
  }

  std::vector<double> scores(indices.size(), 0.0);
  std::vector<char> errored(indices.size(), 0);

  auto work = [&](std::size_t slot) {
    const TaskExample& example = dataset.examples[indices[slot]];
    try {
      std::string prediction =
          forward(program, example.question, engine, options);
      scores[slot] =
          metric_evaluate(metric, prediction, example.answer, &engine);
    } catch (const std::exception&) {
      scores[slot] = 0.0;
      errored[slot] = 1;
    }
  };

  int workers = parallelism < 1 ? 1 : parallelism;
  if (workers <= 1 || indices.size() <= 1) {
    for (std::size_t slot = 0; slot < indices.size(); ++slot) work(slot);
  } else {
    std::atomic<std::size_t> next{0};
    auto runner = [&]() {
      for (std::size_t slot = next.fetch_add(1); slot < indices.size();
           slot = next.fetch_add(1)) {
        work(slot);
      }
    };
    std::vector<std::thread> threads;
    std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(workers), indices.size());
    for (std::size_t i = 0; i < count; ++i) threads.emplace_back(runner);
    for (std::thread& thread : threads) thread.join();
  }

  EvaluationReport report;
  report.n_evaluated = static_cast<long long>(indices.size());
  for (std::size_t slot = 0; slot < indices.size(); ++slot) {
    report.per_example.emplace_back(indices[slot], scores[slot]);
    if (errored[slot]) report.failed.push_back(indices[slot]);
  }
  // Index-sorted accumulation makes the mean bit-identical under any
  // permutation of the split listing or worker completion order.
  std::sort(report.per_example.begin(), report.per_example.end());
  std::sort(report.failed.begin(), report.failed.end());
  double sum = 0.0;
  for (const auto& [index, score] : report.per_example) sum += score;
  report.mean_score = sum / static_cast<double>(indices.size());
  return report;
}

}  // namespace metaopt
