#ifndef STYLEBENCH_ERRORS_HPP_
#define STYLEBENCH_ERRORS_HPP_

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

namespace stylebench {

// Base of every error raised by the library. The CLI maps subclasses of
// ValidationError to exit code 2 and RuntimeFailure to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  explicit ConfigError(const std::string& what)
      : ValidationError("ConfigError: " + what) {}
};

class EmptySentence : public ValidationError {
 public:
  EmptySentence() : ValidationError("EmptySentence: blank input text") {}
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("ParseError at line " + std::to_string(line) + ": " +
                        what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyCorpus : public ValidationError {
 public:
  explicit EmptyCorpus(const std::string& where)
      : ValidationError("EmptyCorpus: " + where) {}
};

class DegenerateCorpus : public ValidationError {
 public:
  DegenerateCorpus()
      : ValidationError("DegenerateCorpus: corpus must contain both labels") {}
};

class AlignmentError : public ValidationError {
 public:
  AlignmentError(std::size_t hyps, std::size_t refs)
      : ValidationError("AlignmentError: " + std::to_string(hyps) +
                        " hypotheses vs " + std::to_string(refs) +
                        " references") {}
};

class EmptyHypothesis : public ValidationError {
 public:
  explicit EmptyHypothesis(std::size_t index)
      : ValidationError("EmptyHypothesis: hypothesis " +
                        std::to_string(index) + " has no tokens") {}
};

class EmptyBatch : public ValidationError {
 public:
  EmptyBatch() : ValidationError("EmptyBatch: no records to evaluate") {}
};

class ShapeError : public ValidationError {
 public:
  explicit ShapeError(const std::string& what)
      : ValidationError("ShapeError: " + what) {}
};

class NonFiniteValue : public ValidationError {
 public:
  NonFiniteValue() : ValidationError("NonFiniteValue: tensor holds NaN/Inf") {}
};

class ZeroVector : public ValidationError {
 public:
  ZeroVector()
      : ValidationError("ZeroVector: cosine similarity of a zero vector") {}
};

class VocabMismatch : public ValidationError {
 public:
  explicit VocabMismatch(const std::string& what)
      : ValidationError("VocabMismatch: " + what) {}
};

class NoCandidates : public RuntimeFailure {
 public:
  explicit NoCandidates(std::size_t record)
      : RuntimeFailure("NoCandidates: no correct-style duplicate for record " +
                       std::to_string(record)),
        record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

class DivergenceError : public RuntimeFailure {
 public:
  DivergenceError(std::size_t epoch, std::map<std::string, double> parts)
      : RuntimeFailure(describe(epoch, parts)),
        epoch_(epoch),
        parts_(std::move(parts)) {}
  std::size_t epoch() const { return epoch_; }
  const std::map<std::string, double>& parts() const { return parts_; }

 private:
  static std::string describe(std::size_t epoch,
                              const std::map<std::string, double>& parts) {
    std::string msg =
        "DivergenceError: non-finite loss at epoch " + std::to_string(epoch);
    for (const auto& [name, value] : parts) {
      msg += " " + name + "=" + std::to_string(value);
    }
    return msg;
  }

  std::size_t epoch_;
  std::map<std::string, double> parts_;
};

class InsufficientRuns : public RuntimeFailure {
 public:
  explicit InsufficientRuns(std::size_t n)
      : RuntimeFailure("InsufficientRuns: need at least 2 values, got " +
                       std::to_string(n)) {}
};

}  // namespace stylebench

#endif  // STYLEBENCH_ERRORS_HPP_
