// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <stdexcept>
#include <string>

namespace sanmix {

// Execution policy for the data-parallel kernels.  Exec::serial selects the
// plain reference loops; Exec::parallel selects the OpenMP versions.  Both
// produce identical results (parallel reductions run over fixed blocks that
// are combined in index order), so the serial path doubles as the oracle for
// the parallel one.
enum class Exec { serial, parallel };

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DecompositionError : std::runtime_error {
  DecompositionError(const std::string& msg, int pivot_index)
      : std::runtime_error(msg), pivot(pivot_index) {}
  int pivot;
};

struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasiblePartitionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, long row_index, long column_index)
      : std::runtime_error(msg), row(row_index), column(column_index) {}
  long row;
  long column;
};

struct PreprocessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sanmix
