#pragma once

#include <string>
#include <string_view>

#include "dmvc/error.hpp"

namespace dmvc {

/// Observation model of a view: binary/[0,1] data or real-valued data.
enum class Likelihood { bernoulli, gaussian };

inline std::string to_string(Likelihood kind) {
  return kind == Likelihood::bernoulli ? "bernoulli" : "gaussian";
}

inline Likelihood parse_likelihood(std::string_view text) {
  if (text == "bernoulli") return Likelihood::bernoulli;
  if (text == "gaussian") return Likelihood::gaussian;
  throw UsageError("unknown likelihood kind '" + std::string(text) +
                   "' (expected bernoulli or gaussian)");
}

}  // namespace dmvc
