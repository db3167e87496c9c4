#pragma once

#include "proje/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace proje {

/// Bidirectional name<->id maps for entities and relations. Ids are dense,
/// assigned in first-appearance order.
class Vocabulary {
 public:
  EntityId add_entity(const std::string& name);
  RelationId add_relation(const std::string& name);

  std::optional<EntityId> entity_id(const std::string& name) const;
  std::optional<RelationId> relation_id(const std::string& name) const;

  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

  std::size_t n_entities() const { return entity_names_.size(); }
  std::size_t n_relations() const { return relation_names_.size(); }

  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
};

/// One "name<TAB>id" line per entry.
void write_vocab_file(const std::filesystem::path& path, const std::vector<std::string>& names);

}  // namespace proje
