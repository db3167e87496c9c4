#include "CLI11.hpp"

#include "proje/checkpoint.hpp"
#include "proje/csv.hpp"
#include "proje/evaluation.hpp"
#include "proje/knowledge_graph.hpp"
#include "proje/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace proje;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct TrainArgs {
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string task = "entity";
  std::string variant = "wlistwise";
  std::optional<int> k;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<double> alpha;
  std::optional<double> dropout;
  std::optional<double> py;
  int epochs = 50;
  std::uint64_t seed = 42;
  std::string out_path;
  std::string curve_path;
  std::string entity_vocab_path;
  std::string relation_vocab_path;
  std::size_t val_triples = 0;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a, bool with_py) {
  cmd->add_option("--train", a.train_path, "training triples (head<TAB>relation<TAB>tail)")
      ->required();
  cmd->add_option("--valid", a.valid_path, "validation triples; enables per-epoch metrics");
  cmd->add_option("--test", a.test_path, "test triples (kept out of training)");
  cmd->add_option("--task", a.task, "prediction task")
      ->check(CLI::IsMember({"entity", "relation"}));
  cmd->add_option("--variant", a.variant, "loss variant")
      ->check(CLI::IsMember({"pointwise", "listwise", "wlistwise"}));
  cmd->add_option("--k", a.k, "embedding size (default 200 entity / 100 relation)");
  cmd->add_option("--lr", a.lr, "learning rate (default 0.01)");
  cmd->add_option("--batch", a.batch, "mini-batch size (default 200)");
  cmd->add_option("--alpha", a.alpha, "L1 regularizer weight (default 1e-5)");
  cmd->add_option("--dropout", a.dropout, "dropout probability (default 0.5)");
  if (with_py) {
    cmd->add_option("--py", a.py, "negative-candidate inclusion probability "
                                  "(default 0.5 entity / 0.75 relation)");
  }
  cmd->add_option("--epochs", a.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--val-triples", a.val_triples,
                  "cap on validation triples per epoch (0 = all)");
  cmd->add_option("--entity-vocab", a.entity_vocab_path, "write entity name<TAB>id map here");
  cmd->add_option("--relation-vocab", a.relation_vocab_path,
                  "write relation name<TAB>id map here");
}

ModelConfig resolve_config(const TrainArgs& a) {
  ModelConfig cfg = default_config(parse_task(a.task));
  cfg.variant = parse_variant(a.variant);
  if (a.k) cfg.k = *a.k;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.alpha) cfg.l1_weight = *a.alpha;
  if (a.dropout) cfg.dropout_p = *a.dropout;
  if (a.py) cfg.sampling_p = *a.py;
  validate(cfg);
  if (a.epochs < 0) throw ConfigError("epochs must be >= 0");
  return cfg;
}

void echo_config(const ModelConfig& cfg, const TrainArgs& a) {
  std::cout << "task = " << to_string(cfg.task) << "\n"
            << "variant = " << to_string(cfg.variant) << "\n"
            << "k = " << cfg.k << "\n"
            << "lr = " << cfg.learning_rate << "\n"
            << "batch = " << cfg.batch_size << "\n"
            << "alpha = " << cfg.l1_weight << "\n"
            << "dropout = " << cfg.dropout_p << "\n"
            << "py = " << cfg.sampling_p << "\n"
            << "epochs = " << a.epochs << "\n"
            << "seed = " << a.seed << "\n"
            << "train = " << a.train_path << "\n";
  if (!a.valid_path.empty()) std::cout << "valid = " << a.valid_path << "\n";
  if (!a.test_path.empty()) std::cout << "test = " << a.test_path << "\n";
  std::cout << std::flush;
}

KnowledgeGraph load_graph_for(const TrainArgs& a) {
  return load_graph(a.train_path, a.valid_path, a.test_path);
}

// Trains one model; writes the curve rows through `curve_out` when open.
TrainResult run_training(const KnowledgeGraph& graph, const ModelConfig& cfg, const TrainArgs& a,
                         std::ofstream* curve_out) {
  const bool with_validation = !a.valid_path.empty();
  if (curve_out && curve_out->is_open()) {
    *curve_out << curve_csv_header(with_validation) << "\n";
  }
  TrainOptions options;
  options.validate = with_validation;
  options.validation_split = Split::Valid;
  options.max_val_triples = a.val_triples;

  RngStream rng(a.seed);
  EpochSink sink = [&](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "/" << a.epochs << " mean_loss=" << r.mean_loss;
    if (r.validation) {
      std::cout << " mr_f=" << r.validation->mean_rank_filtered
                << " hits_f=" << r.validation->hits_filtered;
    }
    std::cout << std::endl;
    if (curve_out && curve_out->is_open()) {
      *curve_out << curve_csv_row(r) << "\n";
      curve_out->flush();
    }
  };
  return train(graph, cfg, a.epochs, rng, options, sink);
}

int cmd_train(const TrainArgs& a) {
  const ModelConfig cfg = resolve_config(a);
  echo_config(cfg, a);
  const KnowledgeGraph graph = load_graph_for(a);
  std::cout << "entities = " << graph.n_entities() << ", relations = " << graph.n_relations()
            << ", train triples = " << graph.train.size() << std::endl;
  if (!a.entity_vocab_path.empty()) {
    write_vocab_file(a.entity_vocab_path, graph.vocab.entity_names());
  }
  if (!a.relation_vocab_path.empty()) {
    write_vocab_file(a.relation_vocab_path, graph.vocab.relation_names());
  }

  std::ofstream curve_out;
  if (!a.curve_path.empty()) {
    curve_out.open(a.curve_path);
    if (!curve_out) throw Error("cannot open " + a.curve_path + " for writing");
  }
  const TrainResult result = run_training(graph, cfg, a, &curve_out);

  if (!a.out_path.empty()) {
    save_checkpoint(a.out_path, result.params, cfg.task, cfg.variant);
    std::cout << "checkpoint written to " << a.out_path << std::endl;
  }
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt_path;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string split = "test";
  int hits_k = 0;
  std::string csv_path;
};

// Checkpoint shapes must agree with the graph vocabulary.
void check_shapes(const ModelParams& params, const KnowledgeGraph& graph) {
  if (static_cast<std::size_t>(params.n_entities()) != graph.n_entities() ||
      static_cast<std::size_t>(params.n_relations()) != graph.n_relations()) {
    throw VocabularyError(
        "checkpoint/vocabulary size mismatch: checkpoint has " +
        std::to_string(params.n_entities()) + " entities and " +
        std::to_string(params.n_relations()) + " relations, graph has " +
        std::to_string(graph.n_entities()) + " and " + std::to_string(graph.n_relations()));
  }
}

int cmd_eval(const EvalArgs& a) {
  const LoadedCheckpoint loaded = load_checkpoint(a.ckpt_path);
  const KnowledgeGraph graph = load_graph(a.train_path, a.valid_path, a.test_path);
  check_shapes(loaded.params, graph);

  ModelConfig cfg = default_config(loaded.meta.task);
  cfg.variant = loaded.meta.variant;
  cfg.k = static_cast<int>(loaded.params.k());
  const Split split = parse_split(a.split);

  std::cout << "checkpoint = " << a.ckpt_path << "\n"
            << "task = " << to_string(cfg.task) << "\n"
            << "variant = " << to_string(cfg.variant) << "\n"
            << "k = " << cfg.k << "\n"
            << "split = " << to_string(split) << std::endl;

  EvalOptions options;
  options.hits_k = a.hits_k;
  const EvalReport report = evaluate(graph, loaded.params, cfg, split, options);
  std::cout << format_report(report);
  std::cout << report_csv_header() << "\n" << report_csv_row(report, split) << std::endl;
  if (!a.csv_path.empty()) {
    std::ofstream out(a.csv_path);
    if (!out) throw Error("cannot open " + a.csv_path + " for writing");
    out << report_csv_header() << "\n" << report_csv_row(report, split) << "\n";
  }
  return kExitOk;
}

struct PredictArgs {
  std::string ckpt_path;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string head;
  std::string relation;
  std::string tail;
  int top = 10;
  bool filter = false;
};

std::uint32_t lookup_name(const Vocabulary& vocab, const std::string& name, bool entity) {
  const auto id = entity ? vocab.entity_id(name) : vocab.relation_id(name);
  if (id) return *id;
  const auto& names = entity ? vocab.entity_names() : vocab.relation_names();
  std::string suggestions;
  int shown = 0;
  for (const auto& candidate : names) {
    if (candidate.starts_with(name)) {
      suggestions += (shown == 0 ? " did you mean: " : ", ") + candidate;
      if (++shown == 5) break;
    }
  }
  throw VocabularyError("unknown " + std::string(entity ? "entity" : "relation") + " \"" + name +
                        "\"" + suggestions);
}

int cmd_predict(const PredictArgs& a) {
  const LoadedCheckpoint loaded = load_checkpoint(a.ckpt_path);
  const KnowledgeGraph graph = load_graph(a.train_path, a.valid_path, a.test_path);
  check_shapes(loaded.params, graph);
  if (a.top < 0) throw ConfigError("--top must be >= 0");

  const int given = static_cast<int>(!a.head.empty()) + static_cast<int>(!a.relation.empty()) +
                    static_cast<int>(!a.tail.empty());
  if (given != 2) {
    throw ConfigError("exactly two of --head/--relation/--tail must be given");
  }

  QueryKind kind;
  std::uint32_t known_entity = 0, known_context = 0;
  std::span<const std::uint32_t> known_true;
  if (!a.head.empty() && !a.relation.empty()) {
    kind = QueryKind::Tail;
    known_entity = lookup_name(graph.vocab, a.head, true);
    known_context = lookup_name(graph.vocab, a.relation, false);
    known_true = graph.full_index.tails_of(known_entity, known_context);
  } else if (!a.relation.empty() && !a.tail.empty()) {
    kind = QueryKind::Head;
    known_entity = lookup_name(graph.vocab, a.tail, true);
    known_context = lookup_name(graph.vocab, a.relation, false);
    known_true = graph.full_index.heads_of(known_context, known_entity);
  } else {
    kind = QueryKind::Relation;
    known_entity = lookup_name(graph.vocab, a.head, true);
    known_context = lookup_name(graph.vocab, a.tail, true);
    known_true = graph.full_index.rels_of(known_entity, known_context);
  }

  const ModelParams& p = loaded.params;
  const Vector z = combined_input(p, kind, known_entity, known_context).array().tanh();
  const Matrix& pool =
      kind == QueryKind::Relation ? p.relation_embeddings : p.entity_embeddings;
  Vector logits = pool * z;
  logits.array() += p.projection_bias;
  Vector scores;
  if (loaded.meta.variant == Variant::Pointwise) {
    scores = 1.0 / (1.0 + (-logits.array()).exp());
  } else {
    scores = softmax(logits);
  }

  std::vector<std::uint32_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    if (scores[x] != scores[y]) return scores[x] > scores[y];
    return x < y;
  });

  int printed = 0;
  for (std::uint32_t id : order) {
    if (printed >= a.top) break;
    if (a.filter &&
        std::binary_search(known_true.begin(), known_true.end(), id)) {
      continue;
    }
    const std::string& name = kind == QueryKind::Relation ? graph.vocab.relation_name(id)
                                                          : graph.vocab.entity_name(id);
    std::cout << (printed + 1) << "\t" << name << "\t" << scores[id] << "\n";
    ++printed;
  }
  return kExitOk;
}

struct SweepArgs {
  TrainArgs train;
  std::vector<double> rates = {0.05, 0.25, 0.50, 0.75, 0.95};
  std::string csv_path;
  int hits_k = 0;
};

int cmd_sweep(const SweepArgs& a) {
  TrainArgs base = a.train;
  ModelConfig cfg = resolve_config(base);
  if (base.test_path.empty()) {
    throw ConfigError("--test is required: each sweep point is scored on the test split");
  }
  echo_config(cfg, base);
  std::cout << "rates =";
  for (double r : a.rates) std::cout << " " << r;
  std::cout << std::endl;

  const KnowledgeGraph graph = load_graph_for(base);
  std::vector<std::pair<double, EvalReport>> rows;
  for (double rate : a.rates) {
    ModelConfig point = cfg;
    point.sampling_p = rate;
    validate(point);
    std::cout << "-- sampling rate " << rate << std::endl;
    TrainArgs point_args = base;
    const TrainResult result = run_training(graph, point, point_args, nullptr);
    EvalOptions options;
    options.hits_k = a.hits_k;
    const EvalReport report = evaluate(graph, result.params, point, Split::Test, options);
    std::cout << format_report(report);
    rows.emplace_back(rate, report);
  }

  std::ofstream out;
  if (!a.csv_path.empty()) {
    out.open(a.csv_path);
    if (!out) throw Error("cannot open " + a.csv_path + " for writing");
  }
  const std::string header = "py,mr_raw,mr_filtered,hits_raw,hits_filtered";
  std::cout << header << "\n";
  if (out.is_open()) out << header << "\n";
  for (const auto& [rate, report] : rows) {
    char rate_str[32];
    std::snprintf(rate_str, sizeof(rate_str), "%g", rate);
    const std::string row = std::string(rate_str) + "," + format_double(report.mean_rank_raw) +
                            "," + format_double(report.mean_rank_filtered) + "," +
                            format_double(report.hits_raw) + "," +
                            format_double(report.hits_filtered);
    std::cout << row << "\n";
    if (out.is_open()) out << row << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ProjE embedding-projection models: training, ranking evaluation and prediction "
               "over triple datasets"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_flags(train_cmd, train_args, true);
  train_cmd->add_option("--out", train_args.out_path, "checkpoint output path");
  train_cmd->add_option("--curve", train_args.curve_path, "per-epoch metrics CSV");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "rank held-out triples with a checkpoint");
  eval_cmd->add_option("--ckpt", eval_args.ckpt_path, "checkpoint path")->required();
  eval_cmd->add_option("--train", eval_args.train_path, "training triples (vocabulary source)")
      ->required();
  eval_cmd->add_option("--valid", eval_args.valid_path, "validation triples");
  eval_cmd->add_option("--test", eval_args.test_path, "test triples");
  eval_cmd->add_option("--split", eval_args.split, "split to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "valid", "test"}));
  eval_cmd->add_option("--hits-k", eval_args.hits_k,
                       "HITS@k cutoff (default 10 entity / 1 relation)");
  eval_cmd->add_option("--csv", eval_args.csv_path, "write the report row here");

  PredictArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "rank completions for a partial triple");
  predict_cmd->add_option("--ckpt", predict_args.ckpt_path, "checkpoint path")->required();
  predict_cmd->add_option("--train", predict_args.train_path, "training triples")->required();
  predict_cmd->add_option("--valid", predict_args.valid_path, "validation triples");
  predict_cmd->add_option("--test", predict_args.test_path, "test triples");
  predict_cmd->add_option("--head", predict_args.head, "head entity name");
  predict_cmd->add_option("--relation", predict_args.relation, "relation name");
  predict_cmd->add_option("--tail", predict_args.tail, "tail entity name");
  predict_cmd->add_option("--top", predict_args.top, "how many completions to print")
      ->capture_default_str();
  predict_cmd->add_flag("--filter", predict_args.filter, "hide known true completions");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "train once per candidate-sampling rate and score each on the test split");
  add_train_flags(sweep_cmd, sweep_args.train, false);
  sweep_cmd->add_option("--rates", sweep_args.rates, "sampling rates to sweep")
      ->capture_default_str();
  sweep_cmd->add_option("--csv", sweep_args.csv_path, "rate-vs-metrics CSV");
  sweep_cmd->add_option("--hits-k", sweep_args.hits_k,
                        "HITS@k cutoff (default 10 entity / 1 relation)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::endl;
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (predict_cmd->parsed()) return cmd_predict(predict_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitUsage;
}
