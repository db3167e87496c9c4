#include "proje/training.hpp"

#include "proje/csv.hpp"
#include "proje/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace proje {

namespace {

constexpr double kLogFloor = 1e-12;

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

void fill_uniform(double* data, Index n, double bound, Rng& rng) {
  for (Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

// Appends every id in [0, n) kept with probability p, skipping ids already in
// the sorted `excluded` list.
void sample_ids(std::uint32_t n, double p, std::span<const std::uint32_t> excluded, Rng& rng,
                std::vector<std::uint32_t>& out) {
  std::size_t skip = 0;  // cursor into excluded
  auto is_excluded = [&](std::uint32_t id) {
    while (skip < excluded.size() && excluded[skip] < id) ++skip;
    return skip < excluded.size() && excluded[skip] == id;
  };
  if (p >= 1.0) {
    for (std::uint32_t id = 0; id < n; ++id) {
      if (!is_excluded(id)) out.push_back(id);
    }
    return;
  }
  if (p <= 0.0) return;
  std::int64_t pos = -1;
  while (true) {
    pos += rng.keep_gap(p);
    if (pos >= static_cast<std::int64_t>(n)) break;
    const auto id = static_cast<std::uint32_t>(pos);
    if (!is_excluded(id)) out.push_back(id);
  }
}

}  // namespace

ModelParams init_params(Index n_entities, Index n_relations, Index k, Rng& rng) {
  if (k < 1) throw ConfigError("embedding size must be >= 1");
  if (n_entities < 1 || n_relations < 1) {
    throw ConfigError("initialization requires at least one entity and one relation");
  }
  const double bound = 6.0 / std::sqrt(static_cast<double>(k));
  ModelParams p = ModelParams::zeros(n_entities, n_relations, k);
  fill_uniform(p.entity_embeddings.data(), p.entity_embeddings.size(), bound, rng);
  fill_uniform(p.relation_embeddings.data(), p.relation_embeddings.size(), bound, rng);
  fill_uniform(p.tail_query_entity_weight.data(), k, bound, rng);
  fill_uniform(p.tail_query_relation_weight.data(), k, bound, rng);
  fill_uniform(p.head_query_entity_weight.data(), k, bound, rng);
  fill_uniform(p.head_query_relation_weight.data(), k, bound, rng);
  fill_uniform(p.combination_bias.data(), k, bound, rng);
  p.projection_bias = rng.uniform(-bound, bound);
  return p;
}

TrainingInstance build_instance(const Triple& triple, QueryKind kind, const KnowledgeGraph& graph,
                                double sampling_p, Rng& sampling_rng) {
  TrainingInstance inst;
  inst.kind = kind;
  std::span<const std::uint32_t> positives;
  std::uint32_t candidate_pool = 0;
  switch (kind) {
    case QueryKind::Tail:
      inst.known_entity = triple.head;
      inst.known_context = triple.relation;
      positives = graph.train_index.tails_of(triple.head, triple.relation);
      candidate_pool = static_cast<std::uint32_t>(graph.n_entities());
      break;
    case QueryKind::Head:
      inst.known_entity = triple.tail;
      inst.known_context = triple.relation;
      positives = graph.train_index.heads_of(triple.relation, triple.tail);
      candidate_pool = static_cast<std::uint32_t>(graph.n_entities());
      break;
    case QueryKind::Relation:
      inst.known_entity = triple.head;
      inst.known_context = triple.tail;
      positives = graph.train_index.rels_of(triple.head, triple.tail);
      candidate_pool = static_cast<std::uint32_t>(graph.n_relations());
      break;
  }
  inst.candidates.assign(positives.begin(), positives.end());
  sample_ids(candidate_pool, sampling_p, positives, sampling_rng, inst.candidates);
  inst.labels.assign(inst.candidates.size(), 0);
  std::fill_n(inst.labels.begin(), positives.size(), std::uint8_t{1});
  return inst;
}

std::vector<TrainingInstance> build_instances(std::span<const Triple> triples,
                                              const KnowledgeGraph& graph,
                                              const ModelConfig& config, RngStream& rng) {
  std::vector<TrainingInstance> instances;
  instances.reserve(triples.size());
  for (const Triple& t : triples) {
    QueryKind kind = QueryKind::Relation;
    if (config.task == Task::Entity) {
      kind = rng.direction.bernoulli(0.5) ? QueryKind::Head : QueryKind::Tail;
    }
    instances.push_back(build_instance(t, kind, graph, config.sampling_p, rng.sampling));
  }
  return instances;
}

Vector dropout_mask(Index k, double p, Rng& rng) {
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  Vector mask = Vector::Constant(k, 1.0);
  if (p <= 0.0) return mask;
  const double scale = 1.0 / (1.0 - p);
  for (Index i = 0; i < k; ++i) mask[i] = rng.bernoulli(p) ? 0.0 : scale;
  return mask;
}

Gradients Gradients::zeros(Index k) {
  Gradients g;
  g.tail_query_entity_weight = Vector::Zero(k);
  g.tail_query_relation_weight = Vector::Zero(k);
  g.head_query_entity_weight = Vector::Zero(k);
  g.head_query_relation_weight = Vector::Zero(k);
  g.combination_bias = Vector::Zero(k);
  g.projection_bias = 0.0;
  return g;
}

Vector& Gradients::entity_row(std::uint32_t id, Index k) {
  auto [it, inserted] = entity_rows.try_emplace(id);
  if (inserted) it->second = Vector::Zero(k);
  return it->second;
}

Vector& Gradients::relation_row(std::uint32_t id, Index k) {
  auto [it, inserted] = relation_rows.try_emplace(id);
  if (inserted) it->second = Vector::Zero(k);
  return it->second;
}

double backward(const TrainingInstance& instance, const ModelParams& params, Variant variant,
                const Vector* mask, Gradients& grads) {
  const Index k = params.k();
  const bool relation_query = instance.kind == QueryKind::Relation;

  const Vector first = params.entity_embeddings.row(instance.known_entity);
  const Vector second = relation_query
                            ? Vector(params.entity_embeddings.row(instance.known_context))
                            : Vector(params.relation_embeddings.row(instance.known_context));
  const Vector* d_first = nullptr;
  const Vector* d_second = nullptr;
  switch (instance.kind) {
    case QueryKind::Tail:
      d_first = &params.tail_query_entity_weight;
      d_second = &params.tail_query_relation_weight;
      break;
    case QueryKind::Head:
      d_first = &params.head_query_entity_weight;
      d_second = &params.head_query_relation_weight;
      break;
    case QueryKind::Relation:
      d_first = &params.tail_query_entity_weight;
      d_second = &params.head_query_entity_weight;
      break;
  }

  Vector pre = d_first->cwiseProduct(first) + d_second->cwiseProduct(second) +
               params.combination_bias;
  if (mask != nullptr) pre = pre.cwiseProduct(*mask);
  const Vector z = pre.array().tanh();

  const Matrix& candidate_matrix =
      relation_query ? params.relation_embeddings : params.entity_embeddings;
  const auto n_cand = static_cast<Index>(instance.candidates.size());
  Vector logits(n_cand);
  for (Index i = 0; i < n_cand; ++i) {
    logits[i] = candidate_matrix.row(instance.candidates[static_cast<std::size_t>(i)]).dot(z) +
                params.projection_bias;
  }

  // Loss and d(loss)/d(logit) per variant.
  double loss = 0.0;
  Vector glogit(n_cand);
  switch (variant) {
    case Variant::Pointwise: {
      for (Index i = 0; i < n_cand; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-logits[i]));
        const double y = instance.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        loss -= y != 0.0 ? safe_log(s) : safe_log(1.0 - s);
        glogit[i] = s - y;
      }
      break;
    }
    case Variant::Listwise: {
      const Vector s = softmax(logits);
      const double positives = static_cast<double>(instance.positive_count());
      for (Index i = 0; i < n_cand; ++i) {
        const double target =
            instance.labels[static_cast<std::size_t>(i)] ? 1.0 / positives : 0.0;
        if (target != 0.0) loss -= target * safe_log(s[i]);
        glogit[i] = s[i] - target;
      }
      break;
    }
    case Variant::WeightedListwise: {
      const Vector s = softmax(logits);
      const double positives = static_cast<double>(instance.positive_count());
      for (Index i = 0; i < n_cand; ++i) {
        const double y = instance.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        if (y != 0.0) loss -= safe_log(s[i]);
        glogit[i] = positives * s[i] - y;
      }
      break;
    }
  }

  // Backprop through the projection and the combination.
  grads.projection_bias += glogit.sum();
  Vector gz = Vector::Zero(k);
  for (Index i = 0; i < n_cand; ++i) {
    const std::uint32_t cand = instance.candidates[static_cast<std::size_t>(i)];
    Vector& row = relation_query ? grads.relation_row(cand, k) : grads.entity_row(cand, k);
    row += glogit[i] * z;
    gz += glogit[i] * candidate_matrix.row(cand).transpose();
  }
  Vector gpre = gz.cwiseProduct((1.0 - z.array().square()).matrix());
  if (mask != nullptr) gpre = gpre.cwiseProduct(*mask);

  switch (instance.kind) {
    case QueryKind::Tail:
      grads.tail_query_entity_weight += gpre.cwiseProduct(first);
      grads.tail_query_relation_weight += gpre.cwiseProduct(second);
      break;
    case QueryKind::Head:
      grads.head_query_entity_weight += gpre.cwiseProduct(first);
      grads.head_query_relation_weight += gpre.cwiseProduct(second);
      break;
    case QueryKind::Relation:
      grads.tail_query_entity_weight += gpre.cwiseProduct(first);
      grads.head_query_entity_weight += gpre.cwiseProduct(second);
      break;
  }
  grads.combination_bias += gpre;
  grads.entity_row(instance.known_entity, k) += gpre.cwiseProduct(*d_first);
  if (relation_query) {
    grads.entity_row(instance.known_context, k) += gpre.cwiseProduct(*d_second);
  } else {
    grads.relation_row(instance.known_context, k) += gpre.cwiseProduct(*d_second);
  }
  return loss;
}

double l1_penalty(const ModelParams& p, double alpha) {
  if (alpha < 0.0) throw ConfigError("L1 weight must be >= 0");
  const double sum = p.entity_embeddings.cwiseAbs().sum() +
                     p.relation_embeddings.cwiseAbs().sum() +
                     p.tail_query_entity_weight.cwiseAbs().sum() +
                     p.tail_query_relation_weight.cwiseAbs().sum() +
                     p.head_query_entity_weight.cwiseAbs().sum() +
                     p.head_query_relation_weight.cwiseAbs().sum();
  return alpha * sum;
}

namespace {

void add_sign(const Vector& w, double alpha, Vector& grad) {
  grad.array() += alpha * w.array().sign();
}

}  // namespace

double l1_penalty_and_subgradient(const ModelParams& p, double alpha, Gradients& grads) {
  const double penalty = l1_penalty(p, alpha);
  if (alpha == 0.0) return penalty;
  add_sign(p.tail_query_entity_weight, alpha, grads.tail_query_entity_weight);
  add_sign(p.tail_query_relation_weight, alpha, grads.tail_query_relation_weight);
  add_sign(p.head_query_entity_weight, alpha, grads.head_query_entity_weight);
  add_sign(p.head_query_relation_weight, alpha, grads.head_query_relation_weight);
  for (auto& [id, grad] : grads.entity_rows) {
    grad.array() += alpha * p.entity_embeddings.row(id).array().sign().transpose();
  }
  for (auto& [id, grad] : grads.relation_rows) {
    grad.array() += alpha * p.relation_embeddings.row(id).array().sign().transpose();
  }
  return penalty;
}

AdamState AdamState::init(const ModelParams& p) {
  AdamState s;
  s.m_entity = Matrix::Zero(p.n_entities(), p.k());
  s.v_entity = Matrix::Zero(p.n_entities(), p.k());
  s.m_relation = Matrix::Zero(p.n_relations(), p.k());
  s.v_relation = Matrix::Zero(p.n_relations(), p.k());
  s.m_tail_e = Vector::Zero(p.k());
  s.v_tail_e = Vector::Zero(p.k());
  s.m_tail_r = Vector::Zero(p.k());
  s.v_tail_r = Vector::Zero(p.k());
  s.m_head_e = Vector::Zero(p.k());
  s.v_head_e = Vector::Zero(p.k());
  s.m_head_r = Vector::Zero(p.k());
  s.v_head_r = Vector::Zero(p.k());
  s.m_comb_bias = Vector::Zero(p.k());
  s.v_comb_bias = Vector::Zero(p.k());
  return s;
}

namespace {

// One bias-corrected update over a contiguous coordinate block.
void adam_update(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g, Eigen::Ref<Vector> m,
                 Eigen::Ref<Vector> v, const AdamState& s, double lr, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace

void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));

  adam_update(p.tail_query_entity_weight, g.tail_query_entity_weight, s.m_tail_e, s.v_tail_e, s,
              lr, bc1, bc2);
  adam_update(p.tail_query_relation_weight, g.tail_query_relation_weight, s.m_tail_r, s.v_tail_r,
              s, lr, bc1, bc2);
  adam_update(p.head_query_entity_weight, g.head_query_entity_weight, s.m_head_e, s.v_head_e, s,
              lr, bc1, bc2);
  adam_update(p.head_query_relation_weight, g.head_query_relation_weight, s.m_head_r, s.v_head_r,
              s, lr, bc1, bc2);
  adam_update(p.combination_bias, g.combination_bias, s.m_comb_bias, s.v_comb_bias, s, lr, bc1,
              bc2);

  {
    s.m_proj_bias = s.beta1 * s.m_proj_bias + (1.0 - s.beta1) * g.projection_bias;
    s.v_proj_bias =
        s.beta2 * s.v_proj_bias + (1.0 - s.beta2) * g.projection_bias * g.projection_bias;
    p.projection_bias -=
        lr * (s.m_proj_bias / bc1) / (std::sqrt(s.v_proj_bias / bc2) + s.eps);
  }

  for (const auto& [id, grad] : g.entity_rows) {
    adam_update(p.entity_embeddings.row(id).transpose(), grad,
                s.m_entity.row(id).transpose(), s.v_entity.row(id).transpose(), s, lr, bc1, bc2);
  }
  for (const auto& [id, grad] : g.relation_rows) {
    adam_update(p.relation_embeddings.row(id).transpose(), grad,
                s.m_relation.row(id).transpose(), s.v_relation.row(id).transpose(), s, lr, bc1,
                bc2);
  }
}

TrainResult train(const KnowledgeGraph& graph, const ModelConfig& config, int epochs,
                  RngStream& rng, const TrainOptions& options, const EpochSink& sink) {
  validate(config);
  if (graph.train.empty()) throw TrainingError("training split is empty");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");

  TrainResult result;
  result.params = init_params(static_cast<Index>(graph.n_entities()),
                              static_cast<Index>(graph.n_relations()), config.k, rng.init);
  AdamState state = AdamState::init(result.params);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto instances = build_instances(graph.train, graph, config, rng);
    rng.shuffling.shuffle(instances);

    double epoch_objective = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin < instances.size(); begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, instances.size());
      Gradients grads = Gradients::zeros(config.k);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const Vector mask = dropout_mask(config.k, config.dropout_p, rng.dropout);
        batch_loss += backward(instances[i], result.params, config.variant, &mask, grads);
      }
      batch_loss += l1_penalty_and_subgradient(result.params, config.l1_weight, grads);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(n_batches));
      }
      adam_step(result.params, grads, state, config.learning_rate);
      epoch_objective += batch_loss;
      ++n_batches;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = epoch_objective / static_cast<double>(n_batches);
    if (options.validate) {
      EvalOptions eval_options;
      eval_options.hits_k = options.hits_k;
      eval_options.max_triples = options.max_val_triples;
      record.validation =
          evaluate(graph, result.params, config, options.validation_split, eval_options);
    }
    if (sink) sink(record);
    result.curve.push_back(std::move(record));
  }
  return result;
}

std::string curve_csv_header(bool with_validation) {
  std::string header = "epoch,mean_loss";
  if (with_validation) header += ",mr_raw,mr_filtered,hits_raw,hits_filtered";
  return header;
}

std::string curve_csv_row(const EpochRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + format_double(r.mean_loss);
  if (r.validation) {
    row += "," + format_double(r.validation->mean_rank_raw);
    row += "," + format_double(r.validation->mean_rank_filtered);
    row += "," + format_double(r.validation->hits_raw);
    row += "," + format_double(r.validation->hits_filtered);
  }
  return row;
}

}  // namespace proje
