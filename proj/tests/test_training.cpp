#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "proje/training.hpp"

#include "fixtures.hpp"
#include "synthetic_kg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

using namespace proje;

namespace {

double forward_loss(const ModelParams& p, const TrainingInstance& inst, Variant variant,
                    const Vector* mask) {
  if (variant == Variant::Pointwise) {
    return loss_pointwise(score_pointwise(p, inst, mask), inst.labels);
  }
  const Vector s = score_listwise(p, inst, mask);
  return variant == Variant::Listwise ? loss_listwise(s, inst.labels)
                                      : loss_wlistwise(s, inst.labels);
}

struct TensorRef {
  std::string name;
  double* data;
  Index size;
};

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  return {
      {"entity_embeddings", p.entity_embeddings.data(), p.entity_embeddings.size()},
      {"relation_embeddings", p.relation_embeddings.data(), p.relation_embeddings.size()},
      {"tail_query_entity_weight", p.tail_query_entity_weight.data(), p.k()},
      {"tail_query_relation_weight", p.tail_query_relation_weight.data(), p.k()},
      {"head_query_entity_weight", p.head_query_entity_weight.data(), p.k()},
      {"head_query_relation_weight", p.head_query_relation_weight.data(), p.k()},
      {"combination_bias", p.combination_bias.data(), p.k()},
  };
}

double analytic_entry(const Gradients& g, const std::string& name, Index flat, Index k) {
  auto sparse_row = [&](const std::map<std::uint32_t, Vector>& rows) {
    const auto row = static_cast<std::uint32_t>(flat / k);
    const Index col = flat % k;
    auto it = rows.find(row);
    return it == rows.end() ? 0.0 : it->second[col];
  };
  if (name == "entity_embeddings") return sparse_row(g.entity_rows);
  if (name == "relation_embeddings") return sparse_row(g.relation_rows);
  if (name == "tail_query_entity_weight") return g.tail_query_entity_weight[flat];
  if (name == "tail_query_relation_weight") return g.tail_query_relation_weight[flat];
  if (name == "head_query_entity_weight") return g.head_query_entity_weight[flat];
  if (name == "head_query_relation_weight") return g.head_query_relation_weight[flat];
  if (name == "combination_bias") return g.combination_bias[flat];
  FAIL("unknown tensor");
  return 0.0;
}

// Central finite differences over every learnable scalar. Returns the worst
// scaled error seen.
double fd_check(ModelParams& p, const TrainingInstance& inst, Variant variant,
                const Vector* mask) {
  Gradients grads = Gradients::zeros(p.k());
  const double loss = backward(inst, p, variant, mask, grads);
  CHECK(std::abs(loss - forward_loss(p, inst, variant, mask)) <= 1e-12);

  constexpr double h = 1e-5;
  double worst = 0.0;
  auto scaled_error = [](double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
  };
  for (const TensorRef& tensor : tensor_refs(p)) {
    for (Index f = 0; f < tensor.size; ++f) {
      const double orig = tensor.data[f];
      tensor.data[f] = orig + h;
      const double up = forward_loss(p, inst, variant, mask);
      tensor.data[f] = orig - h;
      const double down = forward_loss(p, inst, variant, mask);
      tensor.data[f] = orig;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, scaled_error(analytic_entry(grads, tensor.name, f, p.k()), fd));
    }
  }
  const double orig = p.projection_bias;
  p.projection_bias = orig + h;
  const double up = forward_loss(p, inst, variant, mask);
  p.projection_bias = orig - h;
  const double down = forward_loss(p, inst, variant, mask);
  p.projection_bias = orig;
  worst = std::max(worst, scaled_error(grads.projection_bias, (up - down) / (2.0 * h)));
  return worst;
}

KnowledgeGraph tiny_graph() {
  Vocabulary vocab;
  for (const char* e : {"a", "b", "c", "d", "e"}) vocab.add_entity(e);
  vocab.add_relation("r1");
  vocab.add_relation("r2");
  std::vector<Triple> train = {{0, 0, 1}, {0, 0, 2}, {1, 1, 3}, {4, 0, 1}, {2, 1, 0}};
  return KnowledgeGraph::build(vocab, train);
}

}  // namespace

TEST_CASE("initialization bound is 6 over sqrt k") {
  Rng rng(1, 5);
  {
    ModelParams p = init_params(20, 4, 36, rng);  // bound exactly 1
    CHECK(p.entity_embeddings.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(p.relation_embeddings.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(std::abs(p.projection_bias) <= 1.0);
    CHECK(p.entity_embeddings.cwiseAbs().maxCoeff() > 0.9);
  }
  {
    const double bound = 6.0 / std::sqrt(200.0);
    CHECK(bound == doctest::Approx(0.42426).epsilon(1e-4));
    ModelParams p = init_params(50, 4, 200, rng);
    CHECK(p.entity_embeddings.cwiseAbs().maxCoeff() <= bound);
    CHECK(p.entity_embeddings.cwiseAbs().maxCoeff() > 0.42);
    CHECK(p.combination_bias.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("initialization is deterministic per seed") {
  Rng a(77, 5), b(77, 5);
  ModelParams pa = init_params(6, 2, 4, a);
  ModelParams pb = init_params(6, 2, 4, b);
  CHECK(pa.entity_embeddings == pb.entity_embeddings);
  CHECK(pa.relation_embeddings == pb.relation_embeddings);
  CHECK(pa.combination_bias == pb.combination_bias);
  CHECK(pa.projection_bias == pb.projection_bias);
}

TEST_CASE("zero embedding size is a configuration error") {
  Rng rng(1, 5);
  CHECK_THROWS_AS(init_params(5, 2, 0, rng), ConfigError);
}

TEST_CASE("sampling probability zero keeps positives only") {
  auto graph = tiny_graph();
  Rng rng(3, 2);
  auto inst = build_instance({0, 0, 1}, QueryKind::Tail, graph, 0.0, rng);
  CHECK(inst.candidates == std::vector<std::uint32_t>{1, 2});
  CHECK(inst.labels == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("sampling probability one keeps the whole pool") {
  auto graph = tiny_graph();
  Rng rng(3, 2);
  auto inst = build_instance({0, 0, 1}, QueryKind::Tail, graph, 1.0, rng);
  REQUIRE(inst.candidates.size() == graph.n_entities());
  std::set<std::uint32_t> unique(inst.candidates.begin(), inst.candidates.end());
  CHECK(unique.size() == graph.n_entities());
  CHECK(inst.positive_count() == 2);
}

TEST_CASE("head and relation instances draw positives from the right map") {
  auto graph = tiny_graph();
  Rng rng(4, 2);
  auto head_inst = build_instance({0, 0, 1}, QueryKind::Head, graph, 0.0, rng);
  CHECK(head_inst.known_entity == 1);
  CHECK(head_inst.known_context == 0);
  CHECK(head_inst.candidates == std::vector<std::uint32_t>{0, 4});  // heads of (r1, b)

  auto rel_inst = build_instance({0, 0, 1}, QueryKind::Relation, graph, 0.0, rng);
  CHECK(rel_inst.known_entity == 0);
  CHECK(rel_inst.known_context == 1);
  CHECK(rel_inst.candidates == std::vector<std::uint32_t>{0});
}

TEST_CASE("negative counts follow the inclusion probability") {
  // 10k entities, 3 positive tails for (h0, r0): 9,997 eligible negatives.
  Vocabulary vocab;
  for (int i = 0; i < 10000; ++i) vocab.add_entity("e" + std::to_string(i));
  vocab.add_relation("r");
  std::vector<Triple> train = {{0, 0, 1}, {0, 0, 2}, {0, 0, 3}};
  auto graph = KnowledgeGraph::build(vocab, train);

  const double p = 0.25;
  double total_negatives = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed, 2);
    auto inst = build_instance({0, 0, 1}, QueryKind::Tail, graph, p, rng);
    total_negatives += static_cast<double>(inst.candidates.size() - 3);
    CHECK(inst.positive_count() == 3);
  }
  const double expected = 100.0 * p * 9997.0;
  const double sigma = std::sqrt(100.0 * 9997.0 * p * (1.0 - p));
  CHECK(std::abs(total_negatives - expected) <= 3.0 * sigma);
}

TEST_CASE("instances cover every training triple with train-split positives") {
  auto graph = synth::make_graph(5);
  ModelConfig cfg = default_config(Task::Entity);
  cfg.sampling_p = 0.3;
  RngStream rng(123);
  auto instances = build_instances(graph.train, graph, cfg, rng);
  REQUIRE(instances.size() == graph.train.size());

  bool saw_tail = false, saw_head = false;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const TrainingInstance& inst = instances[i];
    saw_tail |= inst.kind == QueryKind::Tail;
    saw_head |= inst.kind == QueryKind::Head;

    // brute-force positive set from the train triples
    std::set<std::uint32_t> expected;
    for (const Triple& t : graph.train) {
      if (inst.kind == QueryKind::Tail && t.head == inst.known_entity &&
          t.relation == inst.known_context) {
        expected.insert(t.tail);
      }
      if (inst.kind == QueryKind::Head && t.tail == inst.known_entity &&
          t.relation == inst.known_context) {
        expected.insert(t.head);
      }
    }
    std::set<std::uint32_t> got;
    for (std::size_t j = 0; j < inst.candidates.size(); ++j) {
      if (inst.labels[j]) got.insert(inst.candidates[j]);
    }
    CHECK(got == expected);
    CHECK(!got.empty());

    std::set<std::uint32_t> unique(inst.candidates.begin(), inst.candidates.end());
    CHECK(unique.size() == inst.candidates.size());
  }
  CHECK(saw_tail);
  CHECK(saw_head);
}

TEST_CASE("relation-task instances always rank relations") {
  auto graph = tiny_graph();
  ModelConfig cfg = default_config(Task::Relation);
  cfg.sampling_p = 1.0;
  RngStream rng(9);
  auto instances = build_instances(graph.train, graph, cfg, rng);
  for (const auto& inst : instances) {
    CHECK(inst.kind == QueryKind::Relation);
    CHECK(inst.candidates.size() == graph.n_relations());
  }
}

TEST_CASE("dropout mask basics") {
  Rng rng(5, 3);
  const Vector all_ones = dropout_mask(8, 0.0, rng);
  CHECK(all_ones == Vector::Ones(8));

  bool saw_zero = false, saw_scaled = false;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector m = dropout_mask(8, 0.5, rng);
    for (Index i = 0; i < 8; ++i) {
      REQUIRE((m[i] == 0.0 || m[i] == 2.0));
      saw_zero |= m[i] == 0.0;
      saw_scaled |= m[i] == 2.0;
    }
  }
  CHECK(saw_zero);
  CHECK(saw_scaled);
  CHECK_THROWS_AS(dropout_mask(8, 1.0, rng), ConfigError);
}

TEST_CASE("inverted dropout is unbiased") {
  Rng rng(6, 3);
  Vector v(4);
  v << 1.0, -2.0, 0.5, 3.0;
  Vector sum = Vector::Zero(4);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    sum += dropout_mask(4, 0.5, rng).cwiseProduct(v);
  }
  const Vector mean = sum / draws;
  for (Index i = 0; i < 4; ++i) {
    CHECK(std::abs(mean[i] - v[i]) <= 0.02 * std::abs(v[i]) + 1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(21, 0);
  for (Variant variant :
       {Variant::Pointwise, Variant::Listwise, Variant::WeightedListwise}) {
    for (QueryKind kind : {QueryKind::Tail, QueryKind::Head, QueryKind::Relation}) {
      for (int trial = 0; trial < 3; ++trial) {
        const Index k = 2 + static_cast<Index>(rng.below(7));  // up to 8
        ModelParams p = fixtures::random_params(5, 3, k, rng);
        auto inst = fixtures::random_instance(kind, 5, 3, 3, rng);
        CHECK(fd_check(p, inst, variant, nullptr) < 1e-5);

        const Vector mask = dropout_mask(k, 0.4, rng);
        CHECK(fd_check(p, inst, variant, &mask) < 1e-5);
      }
    }
  }
}

TEST_CASE("listwise gradient vanishes when targets are met exactly") {
  // All candidates positive with identical rows: softmax is uniform and equals
  // the 1/n targets, the cross-entropy minimum.
  Rng rng(22, 0);
  ModelParams p = fixtures::random_params(6, 2, 4, rng);
  p.entity_embeddings.row(2) = p.entity_embeddings.row(1);
  p.entity_embeddings.row(3) = p.entity_embeddings.row(1);
  TrainingInstance inst;
  inst.kind = QueryKind::Tail;
  inst.known_entity = 0;
  inst.known_context = 1;
  inst.candidates = {1, 2, 3};
  inst.labels = {1, 1, 1};

  Gradients grads = Gradients::zeros(4);
  backward(inst, p, Variant::Listwise, nullptr, grads);
  CHECK(grads.projection_bias == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(grads.combination_bias.cwiseAbs().maxCoeff() <= 1e-12);
  for (const auto& [id, row] : grads.entity_rows) {
    CAPTURE(id);
    CHECK(row.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("weighted listwise scales gradients by the positive count") {
  Rng rng(23, 0);
  ModelParams p = fixtures::random_params(6, 2, 4, rng);
  TrainingInstance inst;
  inst.kind = QueryKind::Tail;
  inst.known_entity = 0;
  inst.known_context = 1;
  inst.candidates = {1, 2, 3, 4};
  inst.labels = {1, 1, 0, 0};

  Gradients gl = Gradients::zeros(4), gw = Gradients::zeros(4);
  backward(inst, p, Variant::Listwise, nullptr, gl);
  backward(inst, p, Variant::WeightedListwise, nullptr, gw);
  CHECK(gw.projection_bias == doctest::Approx(2.0 * gl.projection_bias).epsilon(1e-12));
  for (const auto& [id, row] : gl.entity_rows) {
    const Vector& w = gw.entity_rows.at(id);
    for (Index j = 0; j < 4; ++j) CHECK(w[j] == doctest::Approx(2.0 * row[j]).epsilon(1e-10));
  }
}

TEST_CASE("l1 penalty and subgradient") {
  ModelParams p = ModelParams::zeros(2, 1, 3);
  CHECK(l1_penalty(p, 0.0) == 0.0);

  p.tail_query_entity_weight << 1.0, -2.0, 0.0;
  Gradients grads = Gradients::zeros(3);
  const double penalty = l1_penalty_and_subgradient(p, 0.1, grads);
  CHECK(penalty == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(grads.tail_query_entity_weight[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(grads.tail_query_entity_weight[1] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(grads.tail_query_entity_weight[2] == 0.0);  // sign(0) = 0
  CHECK(grads.entity_rows.empty());                 // untouched rows stay lazy

  // penalty is invariant under sign flips
  ModelParams flipped = p;
  flipped.tail_query_entity_weight = -p.tail_query_entity_weight;
  CHECK(l1_penalty(flipped, 0.1) == doctest::Approx(penalty).epsilon(1e-12));

  CHECK_THROWS_AS(l1_penalty(p, -1.0), ConfigError);
}

TEST_CASE("l1 subgradient reaches only rows already touched") {
  Rng rng(24, 0);
  ModelParams p = fixtures::random_params(6, 2, 3, rng);
  Gradients grads = Gradients::zeros(3);
  grads.entity_row(4, 3).setZero();
  l1_penalty_and_subgradient(p, 0.5, grads);
  CHECK(grads.entity_rows.size() == 1);
  for (Index j = 0; j < 3; ++j) {
    CHECK(grads.entity_rows.at(4)[j] ==
          doctest::Approx(0.5 * (p.entity_embeddings(4, j) > 0 ? 1.0 : -1.0)).epsilon(1e-12));
  }
}

TEST_CASE("first adam step moves a fresh coordinate by about minus lr") {
  ModelParams p = ModelParams::zeros(2, 1, 2);
  AdamState state = AdamState::init(p);
  Gradients grads = Gradients::zeros(2);
  grads.combination_bias << 1.0, 0.0;
  adam_step(p, grads, state, 0.01);
  CHECK(p.combination_bias[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.combination_bias[1] == 0.0);  // zero gradient, zero moments
  CHECK(state.t == 1);
}

TEST_CASE("untouched embedding rows never move") {
  Rng rng(25, 0);
  ModelParams p = fixtures::random_params(5, 2, 3, rng);
  const Matrix before = p.entity_embeddings;
  AdamState state = AdamState::init(p);
  Gradients grads = Gradients::zeros(3);
  grads.entity_row(2, 3) << 1.0, -1.0, 0.5;
  adam_step(p, grads, state, 0.01);
  for (Index r = 0; r < 5; ++r) {
    if (r == 2) continue;
    CHECK(p.entity_embeddings.row(r) == before.row(r));
  }
  CHECK(p.entity_embeddings.row(2) != before.row(2));
}

TEST_CASE("two identical steps reduce the loss on a toy instance") {
  Rng rng(26, 0);
  ModelParams p = fixtures::random_params(5, 2, 4, rng);
  auto inst = fixtures::random_instance(QueryKind::Tail, 5, 2, 4, rng);

  const double before = forward_loss(p, inst, Variant::WeightedListwise, nullptr);
  AdamState state = AdamState::init(p);
  for (int step = 0; step < 2; ++step) {
    Gradients grads = Gradients::zeros(4);
    backward(inst, p, Variant::WeightedListwise, nullptr, grads);
    adam_step(p, grads, state, 0.01);
  }
  CHECK(forward_loss(p, inst, Variant::WeightedListwise, nullptr) < before);
}

TEST_CASE("zero epochs returns untouched initial parameters") {
  auto graph = tiny_graph();
  ModelConfig cfg = default_config(Task::Entity);
  cfg.k = 4;
  RngStream rng(31);
  auto result = train(graph, cfg, 0, rng);
  CHECK(result.curve.empty());

  Rng fresh(31, 5);
  ModelParams expected = init_params(static_cast<Index>(graph.n_entities()),
                                     static_cast<Index>(graph.n_relations()), 4, fresh);
  CHECK(result.params.entity_embeddings == expected.entity_embeddings);
  CHECK(result.params.projection_bias == expected.projection_bias);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  auto graph = synth::make_graph(5);
  ModelConfig cfg = default_config(Task::Entity);
  cfg.k = 8;
  cfg.sampling_p = 0.2;

  RngStream rng_a(99), rng_b(99);
  auto a = train(graph, cfg, 3, rng_a);
  auto b = train(graph, cfg, 3, rng_b);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].mean_loss == b.curve[i].mean_loss);
  }
  CHECK(a.params.entity_embeddings == b.params.entity_embeddings);
  CHECK(a.params.relation_embeddings == b.params.relation_embeddings);
  CHECK(a.params.combination_bias == b.params.combination_bias);
  CHECK(a.params.projection_bias == b.params.projection_bias);
}

TEST_CASE("mean training loss falls by epoch ten for every variant") {
  auto graph = synth::make_graph(5);
  for (Variant variant : {Variant::Pointwise, Variant::Listwise, Variant::WeightedListwise}) {
    CAPTURE(static_cast<int>(variant));
    ModelConfig cfg = default_config(Task::Entity);
    cfg.variant = variant;
    cfg.k = 32;
    RngStream rng(7);
    auto result = train(graph, cfg, 10, rng);
    REQUIRE(result.curve.size() == 10);
    CHECK(result.curve[9].mean_loss < result.curve[0].mean_loss);
  }
}

TEST_CASE("relation prediction learns the block rule") {
  // Given (head, tail) the connecting relation is unique, so a trained model
  // should put it first nearly every time. A uniform-random ranker over the
  // 5 relations would sit at HITS@1 = 0.2 and mean rank 3.
  auto graph = synth::make_graph(1);
  ModelConfig cfg = default_config(Task::Relation);
  cfg.k = 16;
  RngStream rng(1);
  auto result = train(graph, cfg, 25, rng);
  auto report = evaluate(graph, result.params, cfg, Split::Test);
  CHECK(report.hits_k == 1);
  CHECK(report.hits_filtered >= 0.9);
  CHECK(report.mean_rank_filtered <= 1.3);
}

TEST_CASE("parameters stay finite through training") {
  auto graph = synth::make_graph(5);
  ModelConfig cfg = default_config(Task::Entity);
  cfg.k = 8;
  RngStream rng(4);
  auto result = train(graph, cfg, 5, rng);
  CHECK(result.params.entity_embeddings.allFinite());
  CHECK(result.params.relation_embeddings.allFinite());
  CHECK(result.params.combination_bias.allFinite());
  CHECK(std::isfinite(result.params.projection_bias));
}

TEST_CASE("a diverging run aborts and names the batch") {
  auto graph = synth::make_graph(5);
  ModelConfig cfg = default_config(Task::Entity);
  cfg.k = 8;
  cfg.learning_rate = 1e308;  // drives parameters to overflow within a batch or two
  RngStream rng(1);
  CHECK_THROWS_WITH_AS(train(graph, cfg, 5, rng), doctest::Contains("batch"), TrainingError);
}

TEST_CASE("empty training split is rejected") {
  Vocabulary vocab;
  vocab.add_entity("a");
  vocab.add_relation("r");
  auto graph = KnowledgeGraph::build(vocab, {});
  ModelConfig cfg = default_config(Task::Entity);
  RngStream rng(1);
  CHECK_THROWS_AS(train(graph, cfg, 1, rng), TrainingError);
}

TEST_CASE("curve csv formatting") {
  CHECK(curve_csv_header(false) == "epoch,mean_loss");
  CHECK(curve_csv_header(true) == "epoch,mean_loss,mr_raw,mr_filtered,hits_raw,hits_filtered");
  EpochRecord r;
  r.epoch = 3;
  r.mean_loss = 1.5;
  CHECK(curve_csv_row(r) == "3,1.5");
  EvalReport report;
  report.mean_rank_raw = 10.0;
  report.mean_rank_filtered = 8.0;
  report.hits_raw = 0.25;
  report.hits_filtered = 0.5;
  r.validation = report;
  CHECK(curve_csv_row(r) == "3,1.5,10,8,0.25,0.5");
}
