#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace proje {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

using Vector = Eigen::VectorXd;
// Row-major so embedding rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// One directed edge of the graph, stored as ids into the vocabularies.
struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

enum class Task { Entity, Relation };

enum class Variant { Pointwise, Listwise, WeightedListwise };

/// Which element of a triple is being ranked by a query.
enum class QueryKind { Tail, Head, Relation };

enum class Split { Train, Valid, Test };

struct ModelConfig {
  Task task = Task::Entity;
  Variant variant = Variant::WeightedListwise;
  int k = 200;               // embedding size
  double learning_rate = 0.01;
  int batch_size = 200;
  double l1_weight = 1e-5;   // alpha
  double dropout_p = 0.5;
  double sampling_p = 0.5;   // inclusion probability for negative candidates
};

/// Stock hyperparameters per task (entity: k=200, p=0.5; relation: k=100, p=0.75).
ModelConfig default_config(Task task);

/// Throws ConfigError on out-of-range settings.
void validate(const ModelConfig& config);

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct VocabularyError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};

std::string_view to_string(Task t);
std::string_view to_string(Variant v);
std::string_view to_string(Split s);
Task parse_task(std::string_view s);
Variant parse_variant(std::string_view s);
Split parse_split(std::string_view s);

}  // namespace proje
