#pragma once

#include <stdexcept>

namespace nmtadv {

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed user input: files, flags, corpora.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The pruned vocabulary for a sentence is empty, so it cannot be attacked.
class NoCandidatesError : public InputError {
 public:
  using InputError::InputError;
};

/// Bad magic, version or layout in a checkpoint or tokenizer file.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

/// Parallel files disagree on their line counts.
class AlignmentError : public InputError {
 public:
  using InputError::InputError;
};

/// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmtadv
