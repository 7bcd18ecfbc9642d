#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drs/corpus.hpp"
#include "drs/model.hpp"

namespace drs {

/// Per-group ranking quality. Recall uses the proportional definition
/// (#relevant in top k / total relevant), which reduces to the hit rate for
/// single-positive groups.
struct GroupMetrics {
  double r_at_1 = 0.0;
  double r_at_2 = 0.0;
  double r_at_5 = 0.0;
  double p_at_1 = 0.0;
  double ap = 0.0;
  double rr = 0.0;
};

struct MetricsReport {
  double r_at_1 = 0.0;
  double r_at_2 = 0.0;
  double r_at_5 = 0.0;
  double p_at_1 = 0.0;
  double map = 0.0;
  double mrr = 0.0;
  std::int64_t group_count = 0;     // groups that were scored
  std::int64_t skipped_groups = 0;  // groups with zero relevant candidates
};

/// Candidate indices sorted by score descending, ties broken by original
/// index ascending. `labels` only participates in the length check.
std::vector<int> rank_group(const std::vector<double>& scores,
                            const std::vector<int>& labels);

/// Metrics for one group given its labels in rank order. At least one label
/// must be relevant; zero-relevant groups are the caller's job to skip.
GroupMetrics group_metrics(const std::vector<int>& ranked_labels);

/// Score every candidate of every group with the model's match head and
/// average per-group metrics over groups with at least one relevant
/// candidate. Groups without one are skipped and counted. When `score_dump`
/// is non-null, appends one "group TAB candidate TAB score TAB label" line
/// per candidate. Throws DataError when every group is skipped.
MetricsReport evaluate(const Model& model, const std::vector<CandidateGroup>& groups,
                       const Vocabulary& vocab, int max_len,
                       std::string* score_dump = nullptr, int batch_size = 64);

/// Aggregation used by evaluate(), exposed for scorers other than the model
/// (oracles, external score files). scores_per_group[i] must parallel
/// groups[i]'s candidates.
MetricsReport aggregate_metrics(const std::vector<CandidateGroup>& groups,
                                const std::vector<std::vector<double>>& scores_per_group);

std::string to_json_string(const MetricsReport& report);

}  // namespace drs
