#include "mtp/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mtp/error.hpp"

namespace mtp {
namespace {

struct Entry {
  std::size_t participant;
  const TurningPoint* tp;
};

// union-find over TP entries
struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

std::vector<FeelingObservation> merge_feelings(
    const std::vector<const TurningPoint*>& members, bool pre) {
  std::vector<FeelingObservation> all;
  for (const TurningPoint* tp : members) {
    const auto& src = pre ? tp->pre_feelings : tp->post_feelings;
    all.insert(all.end(), src.begin(), src.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.label < b.label;
  });
  all.erase(std::unique(all.begin(), all.end(),
                        [](const auto& a, const auto& b) {
                          return a.ts == b.ts && a.label == b.label;
                        }),
            all.end());
  return all;
}

std::vector<EvidencedState> merge_dbp(const std::vector<const TurningPoint*>& members,
                                      bool pre) {
  std::vector<EvidencedState> all;
  for (const TurningPoint* tp : members) {
    const auto& src = pre ? tp->pre_dbp : tp->post_dbp;
    all.insert(all.end(), src.begin(), src.end());
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.evidence_ts != b.evidence_ts ? a.evidence_ts < b.evidence_ts
                                          : a.description < b.description;
  });
  all.erase(std::unique(all.begin(), all.end(),
                        [](const auto& a, const auto& b) {
                          return a.evidence_ts == b.evidence_ts &&
                                 a.description == b.description;
                        }),
            all.end());
  return all;
}

std::string join_unique_sorted(std::vector<std::string> parts, const char* sep) {
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

}  // namespace

ConsensusResult consensus_merge(std::span<const AnnotationRecord> records,
                                const std::string& judge_id,
                                const ConsensusOptions& options) {
  if (records.size() < 2)
    throw input_error("consensus_merge needs at least two annotation records");
  if (!(options.delta_merge_s > 0.0))
    throw input_error("delta_merge must be positive");
  const std::string& conv_id = records[0].conversation_id;
  for (const AnnotationRecord& r : records)
    if (r.conversation_id != conv_id)
      throw input_error("annotation records reference different conversations: '" +
                        conv_id + "' vs '" + r.conversation_id + "'");
  std::set<std::string> ids;
  for (const AnnotationRecord& r : records)
    if (!ids.insert(r.annotator_id).second)
      throw input_error("duplicate annotator id '" + r.annotator_id + "'");
  if (!ids.contains(judge_id))
    throw input_error("judge id '" + judge_id + "' matches no annotation record");

  std::vector<Entry> entries;
  for (std::size_t p = 0; p < records.size(); ++p)
    for (const TurningPoint& tp : records[p].turning_points)
      entries.push_back({p, &tp});

  DisjointSet ds(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (std::abs(entries[i].tp->location_s - entries[j].tp->location_s) <=
          options.delta_merge_s)
        ds.unite(i, j);

  // group members by cluster root
  std::vector<std::vector<std::size_t>> clusters;
  {
    std::vector<std::size_t> root_of(entries.size());
    std::vector<std::size_t> seen;  // roots in first-seen order
    for (std::size_t i = 0; i < entries.size(); ++i) root_of[i] = ds.find(i);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto it = std::find(seen.begin(), seen.end(), root_of[i]);
      if (it == seen.end()) {
        seen.push_back(root_of[i]);
        clusters.emplace_back();
        it = seen.end() - 1;
      }
      clusters[static_cast<std::size_t>(it - seen.begin())].push_back(i);
    }
  }

  ConsensusResult result;
  for (const auto& cluster : clusters) {
    std::set<std::string> endorsers;
    std::vector<const TurningPoint*> members;
    std::vector<double> annotator_locations;  // non-judge members only
    std::vector<double> all_locations;
    for (std::size_t idx : cluster) {
      const Entry& e = entries[idx];
      endorsers.insert(records[e.participant].annotator_id);
      members.push_back(e.tp);
      all_locations.push_back(e.tp->location_s);
      if (records[e.participant].annotator_id != judge_id)
        annotator_locations.push_back(e.tp->location_s);
    }
    // summing in sorted order keeps the mean independent of record order
    auto mean_of = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      return sum / static_cast<double>(v.size());
    };

    ClusterDecision decision;
    decision.endorsers.assign(endorsers.begin(), endorsers.end());
    decision.kept = endorsers.size() >= 2;
    const std::vector<double>& loc_src =
        annotator_locations.empty() ? all_locations : annotator_locations;
    decision.location_s = mean_of(loc_src);

    if (decision.kept) {
      TurningPoint merged;
      merged.location_s = decision.location_s;
      std::vector<std::string> causes;
      std::vector<std::string> explanations;
      for (const TurningPoint* tp : members) {
        causes.push_back(tp->cause);
        if (tp->explanation && !tp->explanation->empty())
          explanations.push_back(*tp->explanation);
      }
      merged.cause = join_unique_sorted(std::move(causes), "; ");
      if (!explanations.empty())
        merged.explanation = join_unique_sorted(std::move(explanations), "; ");
      merged.pre_feelings = merge_feelings(members, true);
      merged.post_feelings = merge_feelings(members, false);
      merged.pre_dbp = merge_dbp(members, true);
      merged.post_dbp = merge_dbp(members, false);
      // keep a type tag only when every tagged member agrees
      std::set<TpType> tags;
      for (const TurningPoint* tp : members)
        if (tp->type_tag) tags.insert(*tp->type_tag);
      if (tags.size() == 1) merged.type_tag = *tags.begin();
      result.kept.push_back(std::move(merged));
      decision.note = "kept: " + std::to_string(endorsers.size()) + " of " +
                      std::to_string(records.size()) + " votes";
    } else {
      decision.note = "rejected: 1 of " + std::to_string(records.size()) + " votes";
    }
    result.decisions.push_back(std::move(decision));
  }

  std::sort(result.kept.begin(), result.kept.end(), [](const auto& a, const auto& b) {
    return a.location_s != b.location_s ? a.location_s < b.location_s : a.cause < b.cause;
  });
  std::sort(result.decisions.begin(), result.decisions.end(),
            [](const auto& a, const auto& b) {
              return a.location_s != b.location_s ? a.location_s < b.location_s
                                                  : a.endorsers < b.endorsers;
            });

  // discordant annotations: everyone proposed a TP, nothing reached two votes
  bool all_proposed = true;
  for (const AnnotationRecord& r : records)
    if (r.turning_points.empty()) all_proposed = false;
  result.flag_delete = all_proposed && result.kept.empty() && !entries.empty();

  return result;
}

}  // namespace mtp
