#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metaopt {

// A learnable text value: the unit every optimizer edits. Holds the current
// value, a role description, and the critiques accumulated against it.
// Feedback is append-only.
class TextVariable {
 public:
  TextVariable() = default;

  TextVariable(std::string value, std::string role_description,
               bool learnable = true)
      : value_(std::move(value)),
        role_description_(std::move(role_description)),
        learnable_(learnable) {
    if (role_description_.empty()) {
      throw std::invalid_argument("TextVariable requires a role description");
    }
  }

  const std::string& value() const { return value_; }
  const std::string& role_description() const { return role_description_; }
  bool learnable() const { return learnable_; }
  const std::vector<std::string>& feedback() const { return feedback_; }

  void set_value(std::string value) { value_ = std::move(value); }
  void add_feedback(std::string note) { feedback_.push_back(std::move(note)); }

  // Restores accumulated feedback when loading a persisted variable.
  void restore_feedback(std::vector<std::string> notes) {
    feedback_ = std::move(notes);
  }

  friend bool operator==(const TextVariable& a, const TextVariable& b) {
    return a.value_ == b.value_ && a.role_description_ == b.role_description_ &&
           a.learnable_ == b.learnable_ && a.feedback_ == b.feedback_;
  }

 private:
  std::string value_;
  std::string role_description_;
  bool learnable_ = true;
  std::vector<std::string> feedback_;
};

}  // namespace metaopt
