#pragma once

#include <stdexcept>
#include <string>

namespace factsteer {

// Base for every error raised by the library. Callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A contrastive group (factual_degraded / personalized_beneficial) or a
// steering source set has no members.
class EmptyGroupError : public Error {
 public:
  EmptyGroupError(const std::string& group, const std::string& what)
      : Error(what), group_(group) {}
  const std::string& group() const noexcept { return group_; }

 private:
  std::string group_;
};

// Transport-level failure talking to an external model or embedder.
class ClientError : public Error {
 public:
  using Error::Error;
};

// Artifact written for a different backend (depth / hidden size / vocab).
class ArtifactMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace factsteer
