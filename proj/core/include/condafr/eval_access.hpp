#pragma once

// Evaluation-only access to hidden query labels. Training code must not
// include this header; evaluation, bound estimation and feature dumps do.

#include "condafr/streams.hpp"

namespace condafr::streams {

inline EvalAccess grant_eval_access() { return EvalAccess{}; }

}  // namespace condafr::streams
