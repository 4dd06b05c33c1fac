// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "rkstage/errors.hpp"

namespace rkstage {

/// Stage splitting of the coupled system: (I, A) or (A^{-1}, I).
enum class Splitting { AI, IA };

/// Unknowns solved for in each step.
enum class StageFormulation {
  StageDerivativeAI,  ///< stage derivatives k
  StageDerivativeIA,  ///< w = (A (x) I) k
  StageValue,         ///< stage values Y
  Dirk                ///< one stage at a time, lower-triangular A
};

enum class BcMethod { DAE, ODE };

inline std::string to_string(StageFormulation f) {
  switch (f) {
    case StageFormulation::StageDerivativeAI: return "deriv-ai";
    case StageFormulation::StageDerivativeIA: return "deriv-ia";
    case StageFormulation::StageValue: return "value";
    case StageFormulation::Dirk: return "dirk";
  }
  return "?";
}

inline StageFormulation formulation_from_flags(const std::string& stage_type,
                                               const std::string& splitting) {
  if (stage_type == "deriv") {
    if (splitting == "ai") return StageFormulation::StageDerivativeAI;
    if (splitting == "ia") return StageFormulation::StageDerivativeIA;
    throw Error("unknown splitting '" + splitting + "'");
  }
  if (stage_type == "value") return StageFormulation::StageValue;
  if (stage_type == "dirk") return StageFormulation::Dirk;
  throw Error("unknown stage type '" + stage_type + "'");
}

inline BcMethod bc_method_from_string(const std::string& s) {
  if (s == "dae") return BcMethod::DAE;
  if (s == "ode") return BcMethod::ODE;
  throw Error("unknown bc method '" + s + "'");
}

}  // namespace rkstage
