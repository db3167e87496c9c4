#pragma once

#include "proje/evaluation.hpp"
#include "proje/knowledge_graph.hpp"
#include "proje/model.hpp"
#include "proje/rng.hpp"
#include "proje/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace proje {

/// Every scalar (embeddings, diagonals, biases) drawn i.i.d. uniform on
/// [-6/sqrt(k), 6/sqrt(k)].
ModelParams init_params(Index n_entities, Index n_relations, Index k, Rng& rng);

/// One instance for one training triple: positives are all train-split
/// completions, negatives are sampled independently with probability
/// `sampling_p` from the remaining ids. Candidates are positives first
/// (ascending), then sampled negatives (ascending).
TrainingInstance build_instance(const Triple& triple, QueryKind kind, const KnowledgeGraph& graph,
                                double sampling_p, Rng& sampling_rng);

/// One instance per triple. Entity task: the missing side is chosen uniformly
/// per triple. Relation task: the relation is always the missing element.
std::vector<TrainingInstance> build_instances(std::span<const Triple> triples,
                                              const KnowledgeGraph& graph,
                                              const ModelConfig& config, RngStream& rng);

/// Inverted dropout: each coordinate is zeroed with probability p, survivors
/// are scaled by 1/(1-p).
Vector dropout_mask(Index k, double p, Rng& rng);

/// Per-batch gradient accumulator. Embedding rows are kept sparsely; the
/// ordered maps make the update order deterministic.
struct Gradients {
  std::map<std::uint32_t, Vector> entity_rows;
  std::map<std::uint32_t, Vector> relation_rows;
  Vector tail_query_entity_weight;
  Vector tail_query_relation_weight;
  Vector head_query_entity_weight;
  Vector head_query_relation_weight;
  Vector combination_bias;
  double projection_bias = 0.0;

  static Gradients zeros(Index k);
  Vector& entity_row(std::uint32_t id, Index k);
  Vector& relation_row(std::uint32_t id, Index k);
};

/// Forward + exact analytic backward for one instance; accumulates into
/// `grads` and returns the loss. `dropout_mask` must be the mask used for the
/// forward pass (nullptr for none).
double backward(const TrainingInstance& instance, const ModelParams& params, Variant variant,
                const Vector* dropout_mask, Gradients& grads);

/// alpha * sum |w| over both embedding matrices and the four diagonals
/// (biases excluded).
double l1_penalty(const ModelParams& params, double alpha);

/// Adds alpha * sign(w) to the diagonals and, lazily, to the embedding rows
/// already touched in `grads`. Returns the full penalty value.
double l1_penalty_and_subgradient(const ModelParams& params, double alpha, Gradients& grads);

struct AdamState {
  Matrix m_entity, v_entity;
  Matrix m_relation, v_relation;
  Vector m_tail_e, v_tail_e, m_tail_r, v_tail_r;
  Vector m_head_e, v_head_e, m_head_r, v_head_r;
  Vector m_comb_bias, v_comb_bias;
  double m_proj_bias = 0.0, v_proj_bias = 0.0;
  std::int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState init(const ModelParams& params);
};

/// Bias-corrected Adam. Dense tensors update every step; embedding rows update
/// lazily, only when their gradient row is present (untouched moments are not
/// decayed).
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;  // mean per-batch objective: data loss + alpha * L1
  std::optional<EvalReport> validation;
};

struct TrainOptions {
  bool validate = false;        // per-epoch metrics on `validation_split`
  Split validation_split = Split::Valid;
  std::size_t max_val_triples = 0;  // 0 = whole split
  int hits_k = 0;                   // 0 = task default
};

using EpochSink = std::function<void(const EpochRecord&)>;

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> curve;
};

/// Full training loop: per epoch, rebuild instances (fresh corruption and
/// sampling), shuffle, then per batch sum instance losses, add the L1 term and
/// apply one Adam step. Aborts with TrainingError on a non-finite loss.
TrainResult train(const KnowledgeGraph& graph, const ModelConfig& config, int epochs,
                  RngStream& rng, const TrainOptions& options = {},
                  const EpochSink& sink = nullptr);

std::string curve_csv_header(bool with_validation);
std::string curve_csv_row(const EpochRecord& record);

}  // namespace proje
