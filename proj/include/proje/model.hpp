#pragma once

#include "proje/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace proje {

/// All learnable tensors. The combination operator is a diagonally weighted
/// sum of two input embeddings, with one diagonal pair per query direction:
/// tail queries weight the known head entity and the relation, head queries
/// weight the known tail entity and the relation. Relation queries reuse the
/// two entity diagonals (head input through the tail-query entity weight,
/// tail input through the head-query entity weight). The combination bias and
/// projection bias are shared by all query kinds.
struct ModelParams {
  Matrix entity_embeddings;    // n_e x k
  Matrix relation_embeddings;  // n_r x k
  Vector tail_query_entity_weight;
  Vector tail_query_relation_weight;
  Vector head_query_entity_weight;
  Vector head_query_relation_weight;
  Vector combination_bias;
  double projection_bias = 0.0;

  Index n_entities() const { return entity_embeddings.rows(); }
  Index n_relations() const { return relation_embeddings.rows(); }
  Index k() const { return entity_embeddings.cols(); }

  static ModelParams zeros(Index n_entities, Index n_relations, Index k);
};

/// One ranking query with an explicit candidate list and binary labels.
/// `known_entity` is the head for tail/relation queries and the tail for head
/// queries; `known_context` is the relation id for entity queries and the
/// tail entity id for relation queries. Candidates index entity embeddings
/// for entity queries and relation embeddings for relation queries.
struct TrainingInstance {
  QueryKind kind = QueryKind::Tail;
  std::uint32_t known_entity = 0;
  std::uint32_t known_context = 0;
  std::vector<std::uint32_t> candidates;
  std::vector<std::uint8_t> labels;

  std::size_t positive_count() const;
};

/// Diagonally weighted sum of the two known inputs plus the combination bias.
/// For tail queries `first` is the head embedding and `second` the relation
/// embedding; for head queries `first` is the tail embedding; for relation
/// queries `first` is the head and `second` the tail embedding.
Vector combine(const Vector& first, const Vector& second, QueryKind kind,
               const ModelParams& params);

/// Gather the known rows for an instance and combine them.
Vector combined_input(const ModelParams& params, QueryKind kind, std::uint32_t known_entity,
                      std::uint32_t known_context);

/// Per-candidate projection logits: w_c . tanh(mask o combine(...)) + b_p.
/// `dropout_mask` (nullable) is applied before tanh; pass nullptr at inference.
Vector candidate_logits(const ModelParams& params, const TrainingInstance& instance,
                        const Vector* dropout_mask = nullptr);

/// Numerically safe softmax (max-subtracted). Sums to 1.
Vector softmax(const Vector& logits);

/// Independent per-candidate scores in (0, 1): sigmoid of each logit.
Vector score_pointwise(const ModelParams& params, const TrainingInstance& instance,
                       const Vector* dropout_mask = nullptr);

/// Jointly normalized scores: softmax over the candidate logits.
Vector score_listwise(const ModelParams& params, const TrainingInstance& instance,
                      const Vector* dropout_mask = nullptr);

// Losses take the matching score vector. Logs are clamped at 1e-12 so exact
// 0/1 scores stay finite.
double loss_pointwise(const Vector& scores, std::span<const std::uint8_t> labels);
double loss_listwise(const Vector& scores, std::span<const std::uint8_t> labels);
double loss_wlistwise(const Vector& scores, std::span<const std::uint8_t> labels);

/// Total learnable scalar count, found by walking every tensor.
std::size_t count_parameters(const ModelParams& params);

}  // namespace proje
