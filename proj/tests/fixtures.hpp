#pragma once

#include "proje/model.hpp"
#include "proje/rng.hpp"

#include <cstdint>
#include <vector>

namespace fixtures {

// Small-magnitude parameters keep scores clear of the log-clamp region.
inline proje::ModelParams random_params(proje::Index n_e, proje::Index n_r, proje::Index k,
                                        proje::Rng& rng, double bound = 0.5) {
  proje::ModelParams p = proje::ModelParams::zeros(n_e, n_r, k);
  auto fill = [&](double* data, proje::Index n) {
    for (proje::Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
  };
  fill(p.entity_embeddings.data(), p.entity_embeddings.size());
  fill(p.relation_embeddings.data(), p.relation_embeddings.size());
  fill(p.tail_query_entity_weight.data(), k);
  fill(p.tail_query_relation_weight.data(), k);
  fill(p.head_query_entity_weight.data(), k);
  fill(p.head_query_relation_weight.data(), k);
  fill(p.combination_bias.data(), k);
  p.projection_bias = rng.uniform(-bound, bound);
  return p;
}

inline proje::TrainingInstance random_instance(proje::QueryKind kind, std::uint32_t n_entities,
                                               std::uint32_t n_relations,
                                               std::size_t n_candidates, proje::Rng& rng) {
  const std::uint32_t pool = kind == proje::QueryKind::Relation ? n_relations : n_entities;
  proje::TrainingInstance inst;
  inst.kind = kind;
  inst.known_entity = static_cast<std::uint32_t>(rng.below(n_entities));
  inst.known_context = static_cast<std::uint32_t>(
      rng.below(kind == proje::QueryKind::Relation ? n_entities : n_relations));
  std::vector<std::uint32_t> ids(pool);
  for (std::uint32_t i = 0; i < pool; ++i) ids[i] = i;
  rng.shuffle(ids);
  const std::size_t n = std::min<std::size_t>(n_candidates, pool);
  inst.candidates.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  inst.labels.assign(n, 0);
  inst.labels[0] = 1;  // every instance has at least one positive
  for (std::size_t i = 1; i < n; ++i) inst.labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  return inst;
}

}  // namespace fixtures
