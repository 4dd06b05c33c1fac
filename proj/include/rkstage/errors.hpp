// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rkstage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedStageCount : public Error {
 public:
  UnsupportedStageCount(const std::string& family, int stages)
      : Error("unsupported stage count " + std::to_string(stages) + " for " +
              family),
        stages_(stages) {}
  int stages() const noexcept { return stages_; }

 private:
  int stages_;
};

/// A zero pivot was met while eliminating without pivoting.
class SingularFactorization : public Error {
 public:
  SingularFactorization(std::size_t stage, const std::string& what)
      : Error(what), stage_(stage) {}
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t stage_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Structurally or numerically singular sparse block.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// The tableau does not support the requested formulation.
class FormulationError : public Error {
 public:
  using Error::Error;
};

class BoundaryConditionError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver exhausted its budget. Carries the residual history.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history,
                 int iterations)
      : Error(what), history_(std::move(history)), iterations_(iterations) {}
  const std::vector<double>& history() const noexcept { return history_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::vector<double> history_;
  int iterations_;
};

/// Newton iteration failed to reduce the stage residual.
class NonlinearDivergence : public NonConvergence {
 public:
  using NonConvergence::NonConvergence;
};

}  // namespace rkstage
