#pragma once

#include <stdexcept>
#include <string>

namespace extrap {

// Precondition / invariant violations (caller bugs).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed serialized data (token streams, jsonl records, checkpoints).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training failed to meet its bound or diverged.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad run configuration (maps to exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or inconsistent upstream artifact (maps to exit code 3).
struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace extrap
