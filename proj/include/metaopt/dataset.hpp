#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace metaopt {

struct TaskExample {
  std::string question;
  std::string answer;

  friend bool operator==(const TaskExample&, const TaskExample&) = default;
};

// A task: (question, answer) pairs, a one-sentence characterization of the
// question type, and named disjoint index splits (train/val/test).
struct TaskDataset {
  std::vector<TaskExample> examples;
  std::string question_type;
  std::map<std::string, std::vector<std::size_t>> splits;

  const std::vector<std::size_t>& split(const std::string& name) const;

  // Throws ConfigError when splits overlap or index out of range.
  void check_splits() const;

  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

// Assigns consecutive index ranges [0,train), [train,train+val), ... as
// the three standard splits. Throws ConfigError when counts exceed size.
void assign_splits(TaskDataset& dataset, std::size_t train, std::size_t val,
                   std::size_t test);

// JSONL: one {"question","answer"} record per line; an optional first
// record {"question_type": ..., "splits": {...}} where each split is
// either an index array or a count (counts take consecutive ranges in
// train/val/test order). Malformed lines raise ParseError with the line
// number. Datasets without a header put every example in train.
TaskDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const TaskDataset& dataset, const std::filesystem::path& path);

// Synthetic word sorting: "Sort the following words: ..." over 4-10
// sampled dictionary words; the answer is the space-joined lexicographic
// sort. Deterministic per seed.
TaskDataset gen_word_sorting(std::size_t n, std::uint64_t rng_seed);

// Synthetic bracket completion over ()[]{}<>: the question is a
// space-separated prefix of a balanced sequence with at least one open
// bracket; the answer is the unique closing completion. Deterministic per
// seed.
TaskDataset gen_dyck(std::size_t n, std::uint64_t rng_seed);

// Stack oracle: the closing tokens (space-joined) completing a bracket
// prefix. Throws ConfigError on a malformed prefix (unmatched closer).
std::string dyck_completion(const std::string& prefix);

// True when the space- or directly-concatenated bracket text is balanced.
bool brackets_balanced(const std::string& text);

}  // namespace metaopt
