#pragma once

#include "proje/knowledge_graph.hpp"
#include "proje/model.hpp"
#include "proje/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace proje {

struct EvalReport {
  Task task = Task::Entity;
  double mean_rank_raw = 0.0;
  double mean_rank_filtered = 0.0;
  double hits_raw = 0.0;
  double hits_filtered = 0.0;
  int hits_k = 10;
  std::size_t n_queries = 0;
};

/// Rank of `target` among the unmasked candidates, descending by score.
/// Ties break toward the lower id, so ranking is deterministic. `filter_mask`
/// (nullable) marks competitors to ignore; the target itself must not be
/// masked.
std::size_t rank_of_target(const Vector& scores, Index target,
                           const std::vector<std::uint8_t>* filter_mask = nullptr);

struct EvalOptions {
  int hits_k = 0;              // 0 = task default (10 for entities, 1 for relations)
  std::size_t max_triples = 0; // 0 = whole split
};

/// Entity task: two queries per triple (head and tail replacement) against all
/// entities. Relation task: one query against all relations. Raw ranks count
/// every competitor; filtered ranks ignore competitors completing a true
/// triple anywhere in train+valid+test. Scoring uses the variant's deployed
/// score with dropout disabled.
EvalReport evaluate(const KnowledgeGraph& graph, const ModelParams& params,
                    const ModelConfig& config, Split split, const EvalOptions& options = {});

int default_hits_k(Task task);

/// Aligned Raw/Filtered x MeanRank/HITS block.
std::string format_report(const EvalReport& report);

std::string report_csv_header();
std::string report_csv_row(const EvalReport& report, Split split);

}  // namespace proje
