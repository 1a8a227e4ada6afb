#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metaopt {

// Malformed structured text (DSL documents, transcripts, datasets, configs).
// `position` is a byte offset or line number depending on the source; -1 when
// the location is not meaningful.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, long long position = -1)
      : std::runtime_error(what), position_(position) {}
  long long position() const { return position_; }

 private:
  long long position_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Engine transport failure after retries were exhausted.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-retryable HTTP failure; carries the status code.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, int status)
      : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// A scripted engine saw a request no transcript entry matches. Never
// fabricates text; the message names the unmatched request.
class UnscriptedRequestError : public std::runtime_error {
 public:
  explicit UnscriptedRequestError(const std::string& what)
      : std::runtime_error(what) {}
};

// Pipeline execution failure; carries the node where execution stopped.
class ExecutionError : public std::runtime_error {
 public:
  ExecutionError(const std::string& what, std::string node_id)
      : std::runtime_error(
            node_id.empty() ? what : what + " (node '" + node_id + "')"),
        node_id_(std::move(node_id)) {}
  const std::string& node_id() const { return node_id_; }

 private:
  std::string node_id_;
};

}  // namespace metaopt
