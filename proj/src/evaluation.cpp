#include "proje/evaluation.hpp"

#include "proje/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace proje {

namespace {

// Score every candidate of the pool for one query. Dropout is never applied.
Vector full_scores(const ModelParams& params, QueryKind kind, std::uint32_t known_entity,
                   std::uint32_t known_context, Variant variant) {
  const Vector z = combined_input(params, kind, known_entity, known_context).array().tanh();
  const Matrix& candidate_matrix =
      kind == QueryKind::Relation ? params.relation_embeddings : params.entity_embeddings;
  Vector logits = candidate_matrix * z;
  logits.array() += params.projection_bias;
  if (variant == Variant::Pointwise) {
    return 1.0 / (1.0 + (-logits.array()).exp());
  }
  return softmax(logits);
}

struct QueryAccumulator {
  double rank_raw_sum = 0.0;
  double rank_filtered_sum = 0.0;
  std::size_t hits_raw = 0;
  std::size_t hits_filtered = 0;
  std::size_t n = 0;

  void add(const Vector& scores, Index target, std::span<const std::uint32_t> true_completions,
           int hits_k) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(scores.size()), 0);
    for (std::uint32_t id : true_completions) mask[id] = 1;
    mask[static_cast<std::size_t>(target)] = 0;

    const std::size_t raw = rank_of_target(scores, target);
    const std::size_t filtered = rank_of_target(scores, target, &mask);
    rank_raw_sum += static_cast<double>(raw);
    rank_filtered_sum += static_cast<double>(filtered);
    hits_raw += raw <= static_cast<std::size_t>(hits_k);
    hits_filtered += filtered <= static_cast<std::size_t>(hits_k);
    ++n;
  }
};

}  // namespace

std::size_t rank_of_target(const Vector& scores, Index target,
                           const std::vector<std::uint8_t>* filter_mask) {
  if (target < 0 || target >= scores.size()) {
    throw std::invalid_argument("rank_of_target: target out of range");
  }
  if (filter_mask != nullptr) {
    if (static_cast<Index>(filter_mask->size()) != scores.size()) {
      throw std::invalid_argument("rank_of_target: mask length mismatch");
    }
    if ((*filter_mask)[static_cast<std::size_t>(target)]) {
      throw std::invalid_argument("rank_of_target: target is masked out");
    }
  }
  const double target_score = scores[target];
  std::size_t rank = 1;
  for (Index j = 0; j < scores.size(); ++j) {
    if (j == target) continue;
    if (filter_mask != nullptr && (*filter_mask)[static_cast<std::size_t>(j)]) continue;
    if (scores[j] > target_score || (scores[j] == target_score && j < target)) ++rank;
  }
  return rank;
}

int default_hits_k(Task task) { return task == Task::Entity ? 10 : 1; }

EvalReport evaluate(const KnowledgeGraph& graph, const ModelParams& params,
                    const ModelConfig& config, Split split, const EvalOptions& options) {
  const std::vector<Triple>& triples = graph.split(split);
  if (triples.empty()) throw Error("evaluation split is empty");
  std::size_t n_triples = triples.size();
  if (options.max_triples > 0) n_triples = std::min(n_triples, options.max_triples);
  const int hits_k = options.hits_k > 0 ? options.hits_k : default_hits_k(config.task);

  QueryAccumulator acc;
  for (std::size_t i = 0; i < n_triples; ++i) {
    const Triple& t = triples[i];
    if (config.task == Task::Entity) {
      const Vector tail_scores =
          full_scores(params, QueryKind::Tail, t.head, t.relation, config.variant);
      acc.add(tail_scores, t.tail, graph.full_index.tails_of(t.head, t.relation), hits_k);
      const Vector head_scores =
          full_scores(params, QueryKind::Head, t.tail, t.relation, config.variant);
      acc.add(head_scores, t.head, graph.full_index.heads_of(t.relation, t.tail), hits_k);
    } else {
      const Vector rel_scores =
          full_scores(params, QueryKind::Relation, t.head, t.tail, config.variant);
      acc.add(rel_scores, t.relation, graph.full_index.rels_of(t.head, t.tail), hits_k);
    }
  }

  EvalReport report;
  report.task = config.task;
  report.hits_k = hits_k;
  report.n_queries = acc.n;
  report.mean_rank_raw = acc.rank_raw_sum / static_cast<double>(acc.n);
  report.mean_rank_filtered = acc.rank_filtered_sum / static_cast<double>(acc.n);
  report.hits_raw = static_cast<double>(acc.hits_raw) / static_cast<double>(acc.n);
  report.hits_filtered = static_cast<double>(acc.hits_filtered) / static_cast<double>(acc.n);
  return report;
}

std::string format_report(const EvalReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "task: %s   queries: %zu\n",
                std::string(to_string(r.task)).c_str(), r.n_queries);
  out += buf;
  std::snprintf(buf, sizeof(buf), "  %-10s %12s %14s\n", "", "Mean Rank",
                ("HITS@" + std::to_string(r.hits_k) + " (%)").c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf), "  %-10s %12.2f %14.2f\n", "Raw", r.mean_rank_raw,
                100.0 * r.hits_raw);
  out += buf;
  std::snprintf(buf, sizeof(buf), "  %-10s %12.2f %14.2f\n", "Filtered", r.mean_rank_filtered,
                100.0 * r.hits_filtered);
  out += buf;
  return out;
}

std::string report_csv_header() {
  return "task,split,mr_raw,mr_filtered,hits_raw,hits_filtered,k,n_queries";
}

std::string report_csv_row(const EvalReport& r, Split split) {
  std::string row(to_string(r.task));
  row += ",";
  row += to_string(split);
  row += "," + format_double(r.mean_rank_raw);
  row += "," + format_double(r.mean_rank_filtered);
  row += "," + format_double(r.hits_raw);
  row += "," + format_double(r.hits_filtered);
  row += "," + std::to_string(r.hits_k);
  row += "," + std::to_string(r.n_queries);
  return row;
}

}  // namespace proje
