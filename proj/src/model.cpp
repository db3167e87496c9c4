#include "proje/model.hpp"

#include <algorithm>
#include <cmath>

namespace proje {

namespace {

constexpr double kLogFloor = 1e-12;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

}  // namespace

ModelParams ModelParams::zeros(Index n_entities, Index n_relations, Index k) {
  ModelParams p;
  p.entity_embeddings = Matrix::Zero(n_entities, k);
  p.relation_embeddings = Matrix::Zero(n_relations, k);
  p.tail_query_entity_weight = Vector::Zero(k);
  p.tail_query_relation_weight = Vector::Zero(k);
  p.head_query_entity_weight = Vector::Zero(k);
  p.head_query_relation_weight = Vector::Zero(k);
  p.combination_bias = Vector::Zero(k);
  p.projection_bias = 0.0;
  return p;
}

std::size_t TrainingInstance::positive_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

Vector combine(const Vector& first, const Vector& second, QueryKind kind,
               const ModelParams& params) {
  const Index k = params.k();
  if (first.size() != k || second.size() != k) {
    throw std::invalid_argument("combine: input length does not match embedding size");
  }
  switch (kind) {
    case QueryKind::Tail:
      return params.tail_query_entity_weight.cwiseProduct(first) +
             params.tail_query_relation_weight.cwiseProduct(second) + params.combination_bias;
    case QueryKind::Head:
      return params.head_query_entity_weight.cwiseProduct(first) +
             params.head_query_relation_weight.cwiseProduct(second) + params.combination_bias;
    case QueryKind::Relation:
      return params.tail_query_entity_weight.cwiseProduct(first) +
             params.head_query_entity_weight.cwiseProduct(second) + params.combination_bias;
  }
  throw std::invalid_argument("combine: bad query kind");
}

Vector combined_input(const ModelParams& params, QueryKind kind, std::uint32_t known_entity,
                      std::uint32_t known_context) {
  const Vector first = params.entity_embeddings.row(known_entity);
  const Vector second = kind == QueryKind::Relation
                            ? Vector(params.entity_embeddings.row(known_context))
                            : Vector(params.relation_embeddings.row(known_context));
  return combine(first, second, kind, params);
}

Vector candidate_logits(const ModelParams& params, const TrainingInstance& instance,
                        const Vector* dropout_mask) {
  Vector pre = combined_input(params, instance.kind, instance.known_entity,
                              instance.known_context);
  if (dropout_mask != nullptr) {
    if (dropout_mask->size() != pre.size()) {
      throw std::invalid_argument("candidate_logits: dropout mask length mismatch");
    }
    pre = pre.cwiseProduct(*dropout_mask);
  }
  const Vector z = pre.array().tanh();
  const Matrix& candidate_matrix = instance.kind == QueryKind::Relation
                                       ? params.relation_embeddings
                                       : params.entity_embeddings;
  Vector logits(static_cast<Index>(instance.candidates.size()));
  for (Index i = 0; i < logits.size(); ++i) {
    logits[i] = candidate_matrix.row(instance.candidates[static_cast<std::size_t>(i)]).dot(z) +
                params.projection_bias;
  }
  return logits;
}

Vector softmax(const Vector& logits) {
  const double max_logit = logits.maxCoeff();
  Vector out = (logits.array() - max_logit).exp();
  out /= out.sum();
  return out;
}

Vector score_pointwise(const ModelParams& params, const TrainingInstance& instance,
                       const Vector* dropout_mask) {
  const Vector logits = candidate_logits(params, instance, dropout_mask);
  return 1.0 / (1.0 + (-logits.array()).exp());
}

Vector score_listwise(const ModelParams& params, const TrainingInstance& instance,
                      const Vector* dropout_mask) {
  return softmax(candidate_logits(params, instance, dropout_mask));
}

double loss_pointwise(const Vector& scores, std::span<const std::uint8_t> labels) {
  double loss = 0.0;
  for (Index i = 0; i < scores.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)]) {
      loss -= safe_log(scores[i]);
    } else {
      loss -= safe_log(1.0 - scores[i]);
    }
  }
  return loss;
}

double loss_listwise(const Vector& scores, std::span<const std::uint8_t> labels) {
  const double positives =
      static_cast<double>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  double loss = 0.0;
  for (Index i = 0; i < scores.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)]) loss -= safe_log(scores[i]) / positives;
  }
  return loss;
}

double loss_wlistwise(const Vector& scores, std::span<const std::uint8_t> labels) {
  double loss = 0.0;
  for (Index i = 0; i < scores.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)]) loss -= safe_log(scores[i]);
  }
  return loss;
}

std::size_t count_parameters(const ModelParams& p) {
  std::size_t count = 0;
  count += static_cast<std::size_t>(p.entity_embeddings.size());
  count += static_cast<std::size_t>(p.relation_embeddings.size());
  count += static_cast<std::size_t>(p.tail_query_entity_weight.size());
  count += static_cast<std::size_t>(p.tail_query_relation_weight.size());
  count += static_cast<std::size_t>(p.head_query_entity_weight.size());
  count += static_cast<std::size_t>(p.head_query_relation_weight.size());
  count += static_cast<std::size_t>(p.combination_bias.size());
  count += 1;  // projection bias
  return count;
}

}  // namespace proje
