#pragma once

#include "factum/scores.hpp"
#include "factum/trace.hpp"

namespace factum::oracle {

// Recomputes every score with plain scalar loops and left-to-right sums.
// Shares no code with the production kernels; used only as a reference.
ScoreSet naive_scores(const CitationRecord& record, const ReportTrace& report);

}  // namespace factum::oracle
