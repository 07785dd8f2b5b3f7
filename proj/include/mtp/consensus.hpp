#pragma once
// Annotation consensus: cluster turning points across annotators and the
// judge, keep clusters endorsed by at least two of the participants, merge
// the endorsers' evidence.

#include <span>
#include <string>
#include <vector>

#include "mtp/types.hpp"

namespace mtp {

struct ConsensusOptions {
  double delta_merge_s = 5.0;  // max location gap for two TPs to count as the same
};

struct ClusterDecision {
  double location_s = 0.0;                // merged location (kept) or cluster mean
  std::vector<std::string> endorsers;     // sorted annotator ids
  bool kept = false;
  std::string note;
};

struct ConsensusResult {
  std::vector<TurningPoint> kept;  // sorted by location
  bool flag_delete = false;        // every participant proposed, nothing agreed
  std::vector<ClusterDecision> decisions;
};

// records must all reference one conversation and include the judge's record
// (annotator_id == judge_id). Keeps a cluster iff >= 2 distinct participants
// endorse it; merged location is the mean over the non-judge endorsing TPs.
ConsensusResult consensus_merge(std::span<const AnnotationRecord> records,
                                const std::string& judge_id,
                                const ConsensusOptions& options = {});

}  // namespace mtp
