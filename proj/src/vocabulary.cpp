#include "proje/vocabulary.hpp"

#include <fstream>

namespace proje {

EntityId Vocabulary::add_entity(const std::string& name) {
  auto [it, inserted] = entity_ids_.try_emplace(name, static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.push_back(name);
  return it->second;
}

RelationId Vocabulary::add_relation(const std::string& name) {
  auto [it, inserted] =
      relation_ids_.try_emplace(name, static_cast<RelationId>(relation_names_.size()));
  if (inserted) relation_names_.push_back(name);
  return it->second;
}

std::optional<EntityId> Vocabulary::entity_id(const std::string& name) const {
  auto it = entity_ids_.find(name);
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::relation_id(const std::string& name) const {
  auto it = relation_ids_.find(name);
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

void write_vocab_file(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t id = 0; id < names.size(); ++id) {
    out << names[id] << '\t' << id << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace proje
