#pragma once

#include <stdexcept>

namespace ddsr {

// Error taxonomy mapped onto process exit codes by the CLI:
//   IoError -> 2 (I/O and file-format problems)
//   ShapeError -> 3 (shape/specification violations)
//   DivergenceError -> 4 (non-finite numerics during training)
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ddsr
