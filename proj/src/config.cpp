#include "proje/types.hpp"

namespace proje {

ModelConfig default_config(Task task) {
  ModelConfig c;
  c.task = task;
  if (task == Task::Entity) {
    c.k = 200;
    c.sampling_p = 0.5;
  } else {
    c.k = 100;
    c.sampling_p = 0.75;
  }
  return c;
}

void validate(const ModelConfig& c) {
  if (c.k < 1) throw ConfigError("embedding size must be >= 1, got " + std::to_string(c.k));
  if (c.batch_size < 1)
    throw ConfigError("batch size must be >= 1, got " + std::to_string(c.batch_size));
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0))
    throw ConfigError("dropout probability must lie in [0, 1), got " +
                      std::to_string(c.dropout_p));
  if (!(c.sampling_p >= 0.0 && c.sampling_p <= 1.0))
    throw ConfigError("sampling probability must lie in [0, 1], got " +
                      std::to_string(c.sampling_p));
  if (!(c.l1_weight >= 0.0))
    throw ConfigError("L1 weight must be >= 0, got " + std::to_string(c.l1_weight));
  if (!(c.learning_rate > 0.0))
    throw ConfigError("learning rate must be > 0, got " + std::to_string(c.learning_rate));
}

std::string_view to_string(Task t) {
  return t == Task::Entity ? "entity" : "relation";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Pointwise: return "pointwise";
    case Variant::Listwise: return "listwise";
    case Variant::WeightedListwise: return "wlistwise";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  if (s == "entity") return Task::Entity;
  if (s == "relation") return Task::Relation;
  throw ConfigError("unknown task: " + std::string(s));
}

Variant parse_variant(std::string_view s) {
  if (s == "pointwise") return Variant::Pointwise;
  if (s == "listwise") return Variant::Listwise;
  if (s == "wlistwise") return Variant::WeightedListwise;
  throw ConfigError("unknown variant: " + std::string(s));
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split: " + std::string(s));
}

}  // namespace proje
