#include "drs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "drs/encode.hpp"
#include "drs/errors.hpp"

namespace drs {

std::vector<int> rank_group(const std::vector<double>& scores,
                            const std::vector<int>& labels) {
  if (scores.empty()) {
    throw DataError("cannot rank an empty candidate group");
  }
  if (scores.size() != labels.size()) {
    throw DataError("scores and labels differ in length: " +
                    std::to_string(scores.size()) + " vs " +
                    std::to_string(labels.size()));
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

GroupMetrics group_metrics(const std::vector<int>& ranked_labels) {
  const int n = static_cast<int>(ranked_labels.size());
  int relevant = 0;
  for (const int label : ranked_labels) {
    relevant += label != 0 ? 1 : 0;
  }
  if (relevant == 0) {
    throw DataError("candidate group has no relevant candidate");
  }

  GroupMetrics m;
  int seen = 0;
  double ap_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const bool hit = ranked_labels[static_cast<std::size_t>(i)] != 0;
    if (hit) {
      ++seen;
      ap_sum += static_cast<double>(seen) / static_cast<double>(i + 1);
      if (m.rr == 0.0) {
        m.rr = 1.0 / static_cast<double>(i + 1);
      }
    }
    const double recall = static_cast<double>(seen) / static_cast<double>(relevant);
    if (i + 1 == 1) {
      m.r_at_1 = recall;
    }
    if (i + 1 == 2) {
      m.r_at_2 = recall;
    }
    if (i + 1 == 5) {
      m.r_at_5 = recall;
    }
  }
  // Groups shorter than a cutoff have already surfaced every relevant
  // candidate by the end of the list.
  const double full = 1.0;
  if (n < 2) {
    m.r_at_2 = full;
  }
  if (n < 5) {
    m.r_at_5 = full;
  }
  m.p_at_1 = ranked_labels.front() != 0 ? 1.0 : 0.0;
  m.ap = ap_sum / static_cast<double>(relevant);
  return m;
}

MetricsReport aggregate_metrics(const std::vector<CandidateGroup>& groups,
                                const std::vector<std::vector<double>>& scores_per_group) {
  if (groups.empty()) {
    throw DataError("no candidate groups to evaluate");
  }
  if (groups.size() != scores_per_group.size()) {
    throw DataError("scores were produced for " +
                    std::to_string(scores_per_group.size()) + " groups, expected " +
                    std::to_string(groups.size()));
  }

  MetricsReport report;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const CandidateGroup& group = groups[g];
    const std::vector<double>& scores = scores_per_group[g];
    if (scores.size() != group.candidates.size()) {
      throw DataError("group " + std::to_string(g) + " got " +
                      std::to_string(scores.size()) + " scores for " +
                      std::to_string(group.candidates.size()) + " candidates");
    }
    std::vector<int> labels;
    labels.reserve(group.candidates.size());
    int relevant = 0;
    for (const Candidate& c : group.candidates) {
      labels.push_back(c.label);
      relevant += c.label != 0 ? 1 : 0;
    }
    if (relevant == 0) {
      ++report.skipped_groups;
      continue;
    }
    const std::vector<int> order = rank_group(scores, labels);
    std::vector<int> ranked;
    ranked.reserve(labels.size());
    for (const int idx : order) {
      ranked.push_back(labels[static_cast<std::size_t>(idx)]);
    }
    const GroupMetrics m = group_metrics(ranked);
    report.r_at_1 += m.r_at_1;
    report.r_at_2 += m.r_at_2;
    report.r_at_5 += m.r_at_5;
    report.p_at_1 += m.p_at_1;
    report.map += m.ap;
    report.mrr += m.rr;
    ++report.group_count;
  }
  if (report.group_count == 0) {
    throw DataError("every candidate group was skipped (no relevant candidates)");
  }
  const double n = static_cast<double>(report.group_count);
  report.r_at_1 /= n;
  report.r_at_2 /= n;
  report.r_at_5 /= n;
  report.p_at_1 /= n;
  report.map /= n;
  report.mrr /= n;
  return report;
}

MetricsReport evaluate(const Model& model, const std::vector<CandidateGroup>& groups,
                       const Vocabulary& vocab, int max_len, std::string* score_dump,
                       int batch_size) {
  if (groups.empty()) {
    throw DataError("no candidate groups to evaluate");
  }
  model.check_vocab(vocab);

  // Encode all candidates once and score them in flat batches; group
  // boundaries are reapplied afterwards.
  std::vector<EncodedInstance> instances;
  for (const CandidateGroup& group : groups) {
    for (const Candidate& candidate : group.candidates) {
      instances.push_back(
          encode_pair(group.context, candidate.response, vocab, max_len, candidate.label));
    }
  }
  const std::vector<double> flat = model.nsp_probabilities(instances, batch_size);

  std::vector<std::vector<double>> scores(groups.size());
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    scores[g].assign(flat.begin() + static_cast<std::ptrdiff_t>(cursor),
                     flat.begin() + static_cast<std::ptrdiff_t>(
                                        cursor + groups[g].candidates.size()));
    cursor += groups[g].candidates.size();
  }
  if (score_dump != nullptr) {
    char score_text[32];
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t c = 0; c < groups[g].candidates.size(); ++c) {
        std::snprintf(score_text, sizeof(score_text), "%.17g", scores[g][c]);
        *score_dump += std::to_string(g) + "\t" + std::to_string(c) + "\t" +
                       score_text + "\t" +
                       std::to_string(groups[g].candidates[c].label) + "\n";
      }
    }
  }
  return aggregate_metrics(groups, scores);
}

std::string to_json_string(const MetricsReport& report) {
  const nlohmann::json j{{"r_at_1", report.r_at_1},
                         {"r_at_2", report.r_at_2},
                         {"r_at_5", report.r_at_5},
                         {"p_at_1", report.p_at_1},
                         {"map", report.map},
                         {"mrr", report.mrr},
                         {"group_count", report.group_count},
                         {"skipped_groups", report.skipped_groups}};
  return j.dump(2);
}

}  // namespace drs
