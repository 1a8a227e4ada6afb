#include "metaopt/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "metaopt/errors.hpp"
#include "metaopt/seeding.hpp"

namespace metaopt {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Deterministic bounded draw; modulo bias is irrelevant at these ranges
// and keeps the sequence stable across standard library implementations.
std::size_t draw(std::mt19937_64& rng, std::size_t bound) {
  return static_cast<std::size_t>(rng() % bound);
}

const std::vector<std::string>& word_list() {
  static const std::vector<std::string> words = {
      "anchor",  "apple",   "autumn",  "badge",   "banana",  "basket",
      "beacon",  "bridge",  "butter",  "cabin",   "camera",  "candle",
      "canyon",  "carpet",  "castle",  "cherry",  "circle",  "cloud",
      "coffee",  "copper",  "coral",   "cotton",  "cradle",  "crystal",
      "dagger",  "daisy",   "desert",  "diamond", "dolphin", "dragon",
      "eagle",   "ember",   "engine",  "falcon",  "feather", "fiddle",
      "flame",   "forest",  "fossil",  "galaxy",  "garden",  "garlic",
      "ginger",  "glacier", "goblet",  "granite", "grape",   "hammer",
      "harbor",  "hazel",   "helmet",  "hollow",  "honey",   "horizon",
      "island",  "ivory",   "jacket",  "jasmine", "jungle",  "kettle",
      "kitten",  "ladder",  "lantern", "lemon",   "lily",    "lobster",
      "magnet",  "mango",   "marble",  "meadow",  "mirror",  "monsoon",
      "mosaic",  "mountain","needle",  "nectar",  "oasis",   "ocean",
      "olive",   "orchid",  "oyster",  "paddle",  "panther", "pearl",
      "pebble",  "pepper",  "piano",   "pillow",  "pine",    "planet",
      "plum",    "pocket",  "prairie", "quartz",  "rabbit",  "raven",
      "ribbon",  "river",   "saddle",  "saffron", "sailor",  "salmon",
      "shadow",  "silver",  "sparrow", "spice",   "spruce",  "summit",
      "sunset",  "thistle", "thunder", "tiger",   "timber",  "tulip",
      "turtle",  "velvet",  "violet",  "walnut",  "whisper", "willow",
      "winter",  "zephyr",
  };
  return words;
}

bool is_opener(char c) {
  return c == '(' || c == '[' || c == '{' || c == '<';
}

char closer_for(char c) {
  switch (c) {
    case '(': return ')';
    case '[': return ']';
    case '{': return '}';
    case '<': return '>';
  }
  return '\0';
}

// Random balanced sequence of `pairs` bracket pairs as a token string.
std::string random_balanced(std::mt19937_64& rng, std::size_t pairs) {
  std::string out;
  std::vector<char> stack;
  std::size_t opened = 0;
  static const char openers[] = {'(', '[', '{', '<'};
  while (opened < pairs || !stack.empty()) {
    bool may_open = opened < pairs;
    bool may_close = !stack.empty();
    bool open = may_open && (!may_close || draw(rng, 2) == 0);
    if (open) {
      char c = openers[draw(rng, 4)];
      stack.push_back(c);
      out.push_back(c);
      ++opened;
    } else {
      out.push_back(closer_for(stack.back()));
      stack.pop_back();
    }
  }
  return out;
}

std::string space_join(const std::string& chars) {
  std::string out;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out.push_back(chars[i]);
  }
  return out;
}

}  // namespace

const std::vector<std::size_t>& TaskDataset::split(
    const std::string& name) const {
  static const std::vector<std::size_t> empty;
  auto it = splits.find(name);
  return it == splits.end() ? empty : it->second;
}

void TaskDataset::check_splits() const {
  std::set<std::size_t> seen;
  for (const auto& [name, indices] : splits) {
    for (std::size_t index : indices) {
      if (index >= examples.size()) {
        throw ConfigError("split '" + name + "' index " +
                          std::to_string(index) + " out of range (size " +
                          std::to_string(examples.size()) + ")");
      }
      if (!seen.insert(index).second) {
        throw ConfigError("splits overlap at index " + std::to_string(index));
      }
    }
  }
}

void assign_splits(TaskDataset& dataset, std::size_t train, std::size_t val,
                   std::size_t test) {
  if (train + val + test > dataset.examples.size()) {
    throw ConfigError("split sizes exceed dataset size " +
                      std::to_string(dataset.examples.size()));
  }
  auto range = [](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = begin + i;
    return out;
  };
  dataset.splits["train"] = range(0, train);
  dataset.splits["val"] = range(train, val);
  dataset.splits["test"] = range(train + val, test);
}

TaskDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  TaskDataset dataset;
  std::string line;
  long long line_no = 0;
  bool saw_header = false;
  std::map<std::string, std::size_t> counts;  // header counts, if given
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " +
                           e.what(),
                       line_no);
    }
    if (!doc.is_object()) {
      throw ParseError("dataset line " + std::to_string(line_no) +
                           " is not an object",
                       line_no);
    }
    if (line_no == 1 && !doc.contains("question")) {
      saw_header = true;
      dataset.question_type = doc.value("question_type", std::string());
      if (doc.contains("splits")) {
        for (const auto& [name, value] : doc.at("splits").items()) {
          if (value.is_array()) {
            dataset.splits[name] = value.get<std::vector<std::size_t>>();
          } else if (value.is_number_unsigned() || value.is_number_integer()) {
            counts[name] = value.get<std::size_t>();
          } else {
            throw ParseError("split '" + name + "' must be an array or count",
                             line_no);
          }
        }
      }
      continue;
    }
    TaskExample example;
    if (!doc.contains("question") || !doc.at("question").is_string() ||
        !doc.contains("answer") || !doc.at("answer").is_string()) {
      throw ParseError("dataset line " + std::to_string(line_no) +
                           " needs string fields 'question' and 'answer'",
                       line_no);
    }
    example.question = doc.at("question").get<std::string>();
    example.answer = doc.at("answer").get<std::string>();
    if (example.question.empty() || example.answer.empty()) {
      throw ParseError("dataset line " + std::to_string(line_no) +
                           " has an empty question or answer",
                       line_no);
    }
    dataset.examples.push_back(std::move(example));
  }
  if (!counts.empty()) {
    // Counts take consecutive ranges in the conventional order.
    std::size_t begin = 0;
    for (const char* name : {"train", "val", "test"}) {
      auto it = counts.find(name);
      if (it == counts.end()) continue;
      if (begin + it->second > dataset.examples.size()) {
        throw ConfigError("split counts exceed dataset size " +
                          std::to_string(dataset.examples.size()));
      }
      std::vector<std::size_t> indices(it->second);
      for (std::size_t i = 0; i < it->second; ++i) indices[i] = begin + i;
      dataset.splits[name] = std::move(indices);
      begin += it->second;
    }
  }
  if (!saw_header || dataset.splits.empty()) {
    std::vector<std::size_t> all(dataset.examples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (dataset.splits.empty()) dataset.splits["train"] = std::move(all);
  }
  dataset.check_splits();
  return dataset;
}

void save_dataset(const TaskDataset& dataset,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  ordered_json header;
  header["question_type"] = dataset.question_type;
  header["splits"] = ordered_json::object();
  for (const auto& [name, indices] : dataset.splits) {
    header["splits"][name] = indices;
  }
  out << header.dump() << "\n";
  for (const TaskExample& example : dataset.examples) {
    out << ordered_json{{"question", example.question},
                        {"answer", example.answer}}
               .dump()
        << "\n";
  }
}

TaskDataset gen_word_sorting(std::size_t n, std::uint64_t rng_seed) {
  if (n < 1) throw ConfigError("gen_word_sorting needs n >= 1");
  std::mt19937_64 rng = seed_stream(rng_seed, "word-sorting");
  const std::vector<std::string>& words = word_list();
  TaskDataset dataset;
  dataset.question_type =
      "sorting a given list of words into alphabetical order";
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 4 + draw(rng, 7);  // 4..10 words
    // Partial Fisher-Yates over word indices: k distinct words.
    std::vector<std::size_t> indices(words.size());
    for (std::size_t j = 0; j < indices.size(); ++j) indices[j] = j;
    std::vector<std::string> chosen;
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t pick = j + draw(rng, indices.size() - j);
      std::swap(indices[j], indices[pick]);
      chosen.push_back(words[indices[j]]);
    }
    std::string question = "Sort the following words:";
    for (const std::string& word : chosen) question += " " + word;
    std::vector<std::string> sorted = chosen;
    std::sort(sorted.begin(), sorted.end());
    std::string answer;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (j > 0) answer += " ";
      answer += sorted[j];
    }
    dataset.examples.push_back({std::move(question), std::move(answer)});
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  dataset.splits["train"] = std::move(all);
  return dataset;
}

std::string dyck_completion(const std::string& prefix) {
  std::vector<char> stack;
  for (char c : prefix) {
    if (c == ' ' || c == '\t') continue;
    if (is_opener(c)) {
      stack.push_back(c);
    } else if (closer_for(stack.empty() ? '\0' : stack.back()) == c) {
      stack.pop_back();
    } else {
      throw ConfigError(std::string("unmatched closer '") + c +
                        "' in bracket prefix");
    }
  }
  std::string completion;
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    if (!completion.empty()) completion += " ";
    completion += closer_for(*it);
  }
  return completion;
}

bool brackets_balanced(const std::string& text) {
  std::vector<char> stack;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n') continue;
    if (is_opener(c)) {
      stack.push_back(c);
    } else {
      if (stack.empty() || closer_for(stack.back()) != c) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

TaskDataset gen_dyck(std::size_t n, std::uint64_t rng_seed) {
  if (n < 1) throw ConfigError("gen_dyck needs n >= 1");
  std::mt19937_64 rng = seed_stream(rng_seed, "dyck");
  TaskDataset dataset;
  dataset.question_type =
      "completing an unfinished bracket sequence so every bracket is closed "
      "in the right order";
  for (std::size_t i = 0; i < n; ++i) {
    std::string sequence = random_balanced(rng, 3 + draw(rng, 6));  // 3..8 pairs
    // Cut at a point that leaves at least one bracket open: scan depths and
    // collect candidate cut positions.
    std::vector<std::size_t> candidates;
    int depth = 0;
    for (std::size_t pos = 1; pos <= sequence.size(); ++pos) {
      depth += is_opener(sequence[pos - 1]) ? 1 : -1;
      if (depth > 0) candidates.push_back(pos);
    }
    std::size_t cut = candidates[draw(rng, candidates.size())];
    std::string prefix = space_join(sequence.substr(0, cut));
    dataset.examples.push_back({prefix, dyck_completion(prefix)});
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  dataset.splits["train"] = std::move(all);
  return dataset;
}

}  // namespace metaopt
