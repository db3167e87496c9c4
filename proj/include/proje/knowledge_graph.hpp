#pragma once

#include "proje/types.hpp"
#include "proje/vocabulary.hpp"

#include <filesystem>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace proje {

/// True-triple lookup over some union of splits: which tails complete (h, r),
/// which heads complete (r, t), which relations connect (h, t). Used both for
/// positive-candidate lookup during training (built over train only) and for
/// the filtered evaluation protocol (built over train+valid+test).
class FilterIndex {
 public:
  static FilterIndex build(std::span<const Triple> triples);

  /// Sorted, duplicate-free id sets; empty span when the key is absent.
  std::span<const EntityId> tails_of(EntityId head, RelationId relation) const;
  std::span<const EntityId> heads_of(RelationId relation, EntityId tail) const;
  std::span<const RelationId> rels_of(EntityId head, EntityId tail) const;

  bool contains(const Triple& t) const;

 private:
  using Key = std::uint64_t;
  static Key key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  std::unordered_map<Key, std::vector<std::uint32_t>> tails_;
  std::unordered_map<Key, std::vector<std::uint32_t>> heads_;
  std::unordered_map<Key, std::vector<std::uint32_t>> rels_;
};

/// Immutable after construction; safe for concurrent readers.
struct KnowledgeGraph {
  Vocabulary vocab;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  FilterIndex train_index;  // positive candidates during training
  FilterIndex full_index;   // filtered metrics: train + valid + test

  static KnowledgeGraph build(Vocabulary vocab, std::vector<Triple> train,
                              std::vector<Triple> valid = {}, std::vector<Triple> test = {});

  const std::vector<Triple>& split(Split s) const;
  std::size_t n_entities() const { return vocab.n_entities(); }
  std::size_t n_relations() const { return vocab.n_relations(); }
};

/// Parse a head<TAB>relation<TAB>tail file, building a fresh vocabulary in
/// first-appearance order. Empty lines are skipped.
std::pair<std::vector<Triple>, Vocabulary> load_triples(const std::filesystem::path& path);

/// Parse against a fixed vocabulary; unknown names are an error.
std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab);

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   const Vocabulary& vocab);

/// Load train (fresh vocabulary) plus optional valid/test files (fixed vocabulary)
/// and build both indexes.
KnowledgeGraph load_graph(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path = {},
                          const std::filesystem::path& test_path = {});

}  // namespace proje
