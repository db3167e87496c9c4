#include "proje/knowledge_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace proje {

namespace {

const std::vector<std::uint32_t> kEmpty;

void sort_unique(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::span<const std::uint32_t> lookup(
    const std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>& map, std::uint64_t key) {
  auto it = map.find(key);
  return it == map.end() ? std::span<const std::uint32_t>(kEmpty)
                         : std::span<const std::uint32_t>(it->second);
}

// Three tab-separated fields; a trailing \r is tolerated.
bool split_line(const std::string& line, std::string& h, std::string& r, std::string& t) {
  const std::size_t first = line.find('\t');
  if (first == std::string::npos) return false;
  const std::size_t second = line.find('\t', first + 1);
  if (second == std::string::npos) return false;
  if (line.find('\t', second + 1) != std::string::npos) return false;
  h = line.substr(0, first);
  r = line.substr(first + 1, second - first - 1);
  t = line.substr(second + 1);
  return true;
}

template <class EntityFn, class RelationFn>
std::vector<Triple> parse_triple_file(const std::filesystem::path& path, EntityFn entity_id,
                                      RelationFn relation_id) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open triple file: " + path.string());
  std::vector<Triple> triples;
  std::string line, h, r, t;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!split_line(line, h, r, t)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected head<TAB>relation<TAB>tail");
    }
    triples.push_back(Triple{entity_id(h), relation_id(r), entity_id(t)});
  }
  return triples;
}

}  // namespace

FilterIndex FilterIndex::build(std::span<const Triple> triples) {
  FilterIndex index;
  for (const Triple& t : triples) {
    index.tails_[key(t.head, t.relation)].push_back(t.tail);
    index.heads_[key(t.relation, t.tail)].push_back(t.head);
    index.rels_[key(t.head, t.tail)].push_back(t.relation);
  }
  for (auto* map : {&index.tails_, &index.heads_, &index.rels_}) {
    for (auto& [_, ids] : *map) sort_unique(ids);
  }
  return index;
}

std::span<const EntityId> FilterIndex::tails_of(EntityId head, RelationId relation) const {
  return lookup(tails_, key(head, relation));
}

std::span<const EntityId> FilterIndex::heads_of(RelationId relation, EntityId tail) const {
  return lookup(heads_, key(relation, tail));
}

std::span<const RelationId> FilterIndex::rels_of(EntityId head, EntityId tail) const {
  return lookup(rels_, key(head, tail));
}

bool FilterIndex::contains(const Triple& t) const {
  auto tails = tails_of(t.head, t.relation);
  return std::binary_search(tails.begin(), tails.end(), t.tail);
}

KnowledgeGraph KnowledgeGraph::build(Vocabulary vocab, std::vector<Triple> train,
                                     std::vector<Triple> valid, std::vector<Triple> test) {
  KnowledgeGraph g;
  g.vocab = std::move(vocab);
  g.train = std::move(train);
  g.valid = std::move(valid);
  g.test = std::move(test);
  g.train_index = FilterIndex::build(g.train);
  std::vector<Triple> all;
  all.reserve(g.train.size() + g.valid.size() + g.test.size());
  all.insert(all.end(), g.train.begin(), g.train.end());
  all.insert(all.end(), g.valid.begin(), g.valid.end());
  all.insert(all.end(), g.test.begin(), g.test.end());
  g.full_index = FilterIndex::build(all);
  return g;
}

const std::vector<Triple>& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    case Split::Test: return test;
  }
  throw Error("bad split");
}

std::pair<std::vector<Triple>, Vocabulary> load_triples(const std::filesystem::path& path) {
  Vocabulary vocab;
  auto triples = parse_triple_file(
      path, [&](const std::string& name) { return vocab.add_entity(name); },
      [&](const std::string& name) { return vocab.add_relation(name); });
  return {std::move(triples), std::move(vocab)};
}

std::vector<Triple> load_triples(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto require = [&](std::optional<std::uint32_t> id, const std::string& name,
                     const char* what) -> std::uint32_t {
    if (!id) {
      throw VocabularyError(path.string() + ": unknown " + what + " \"" + name +
                            "\" (not present in the training vocabulary)");
    }
    return *id;
  };
  return parse_triple_file(
      path,
      [&](const std::string& name) { return require(vocab.entity_id(name), name, "entity"); },
      [&](const std::string& name) { return require(vocab.relation_id(name), name, "relation"); });
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples,
                   const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const Triple& t : triples) {
    out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.relation) << '\t'
        << vocab.entity_name(t.tail) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

KnowledgeGraph load_graph(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path,
                          const std::filesystem::path& test_path) {
  auto [train, vocab] = load_triples(train_path);
  std::vector<Triple> valid, test;
  if (!valid_path.empty()) valid = load_triples(valid_path, vocab);
  if (!test_path.empty()) test = load_triples(test_path, vocab);
  return KnowledgeGraph::build(std::move(vocab), std::move(train), std::move(valid),
                               std::move(test));
}

}  // namespace proje
