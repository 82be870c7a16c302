#include "doctest.h"
#include "test_support.hpp"

#include "corefdre/pipeline.hpp"
#include "corefdre/synthetic.hpp"

using namespace corefdre;
using namespace corefdre::testing;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.word_dim = 8;
  c.type_dim = 2;
  c.id_dim = 2;
  c.hidden_dim = 8;
  c.node_type_dim = 4;
  c.edge_dim = 4;
  c.mlp_hidden = 8;
  c.dropout = 0.2;
  c.learning_rate = 0.01;
  c.epochs = 2;
  c.affinity_embed_dim = 4;
  c.affinity_hidden_dim = 4;
  c.affinity_epochs = 1;
  c.context_radius = 2;
  return c;
}

struct Corpus {
  std::vector<Document> train;
  std::vector<Document> dev;

  Corpus() {
    SyntheticOptions o;
    o.documents = 6;
    o.seed = 3;
    auto docs = generate_synthetic(o);
    train.assign(docs.begin(), docs.begin() + 4);
    dev.assign(docs.begin() + 4, docs.end());
  }
};

}  // namespace

TEST_CASE("zero epochs keeps the initialisation") {
  Corpus c;
  PipelineConfig cfg = tiny_config();
  cfg.epochs = 0;
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  const auto trained = train_model(cfg, synthetic_schema(), c.train, c.dev, aff);
  const auto fresh = RelationModel::create(cfg, synthetic_schema(), c.train, aff);
  REQUIRE(trained->params().all().size() == fresh->params().all().size());
  auto a = trained->params().all().begin();
  for (const Parameter& p : fresh->params().all()) {
    CHECK(a->value() == p.value());
    ++a;
  }
  CHECK(trained->steps() == 0);
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
  Corpus c;
  const PipelineConfig cfg = tiny_config();
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  TrainingLog la;
  TrainingLog lb;
  const auto a = train_model(cfg, synthetic_schema(), c.train, c.dev, aff, &la);
  const auto b = train_model(cfg, synthetic_schema(), c.train, c.dev, aff, &lb);
  REQUIRE(la.epochs.size() == 2);
  for (size_t e = 0; e < la.epochs.size(); ++e) {
    CHECK(la.epochs[e].dev_f1 == lb.epochs[e].dev_f1);
    CHECK(la.epochs[e].train_loss == lb.epochs[e].train_loss);
  }
  const std::string bytes = a->to_archive().serialize();
  CHECK(b->to_archive().serialize() == bytes);
  const auto loaded = RelationModel::from_archive(Archive::parse(bytes));
  CHECK(loaded->to_archive().serialize() == bytes);
  CHECK(max_abs_diff(loaded->probabilities(loaded->prepare(c.dev[0])), a->probabilities(a->prepare(c.dev[0]))) == 0.0);

  PipelineConfig other = cfg;
  other.learning_rate = 0.5;
  CHECK_NOTHROW(a->check_architecture(other));
  other.hops = 3;
  CHECK_THROWS_AS(a->check_architecture(other), ConfigError);
  CHECK_THROWS_AS(RelationModel::from_archive(aff.to_archive()), ArchiveError);
}

TEST_CASE("training input errors") {
  Corpus c;
  PipelineConfig cfg = tiny_config();
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  std::vector<Document> bad = c.train;
  bad[0].facts[0].relation_id = 9;
  CHECK_THROWS_AS(train_model(cfg, synthetic_schema(), bad, {}, aff), ConfigError);
  cfg.theta = 2.0;
  CHECK_THROWS_AS(train_model(cfg, synthetic_schema(), c.train, {}, aff), ConfigError);
}

TEST_CASE("prepared documents honour the ablation switches") {
  Corpus c;
  PipelineConfig cfg = tiny_config();
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  const Document& doc = c.train[0];

  const auto full = RelationModel::create(cfg, synthetic_schema(), c.train, aff);
  const PreparedDocument pf = full->prepare(doc);
  REQUIRE(pf.graph.pronoun_node_count() > 0);
  for (const PronounLink& l : pf.graph.links()) {
    CHECK(l.affinity > 0.0);
    CHECK(l.affinity < 1.0);
  }
  CHECK(pf.candidates.size() == doc.entities.size() * (doc.entities.size() - 1));

  cfg.disable_pronoun_nodes = true;
  const auto none = RelationModel::create(cfg, synthetic_schema(), c.train, aff);
  const PreparedDocument pn = none->prepare(doc);
  CHECK(pn.graph.pronoun_node_count() == 0);
  CHECK(pn.merge.nonZeros() == 0);

  cfg.disable_pronoun_nodes = false;
  cfg.unweighted_pronoun_edges = true;
  const auto flat = RelationModel::create(cfg, synthetic_schema(), c.train, aff);
  const PreparedDocument pw = flat->prepare(doc);
  REQUIRE_FALSE(pw.graph.links().empty());
  for (const PronounLink& l : pw.graph.links()) CHECK(l.affinity == 1.0);
}

TEST_CASE("prediction output") {
  Corpus c;
  const PipelineConfig cfg = tiny_config();
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  const auto model = train_model(cfg, synthetic_schema(), c.train, c.dev, aff);
  CHECK(predict(*model, {}).empty());
  CHECK(prediction_lines({}).empty());
  const auto all = predict(*model, c.dev, true);
  std::size_t cells = 0;
  for (const Document& d : c.dev) cells += d.entities.size() * (d.entities.size() - 1) * 4;
  CHECK(all.size() == cells);
  const auto decided = predict(*model, c.dev);
  for (const PredictionRecord& r : decided) CHECK(r.decision);
  CHECK(prediction_lines(predict(*model, c.dev, true)) == prediction_lines(all));
  const std::string line = prediction_lines({PredictionRecord{"d", 0, 1, "born_in", 0.5, true}});
  CHECK(line == "{\"doc_id\":\"d\",\"head\":0,\"tail\":1,\"relation\":\"born_in\",\"probability\":0.5,\"decision\":true}\n");
}

TEST_CASE("theta sweep and ablation reports") {
  Corpus c;
  PipelineConfig cfg = tiny_config();
  cfg.epochs = 1;
  const AffinityModel aff = train_affinity_model(cfg, c.train);
  const auto model = train_model(cfg, synthetic_schema(), c.train, c.dev, aff);
  const auto sweep = theta_sweep(*model, c.dev, SharedFactIndex{}, {0.0, 0.5, 1.01});
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].participating >= sweep[1].participating);
  CHECK(sweep[1].participating >= sweep[2].participating);
  CHECK(sweep[2].participating == 0);
  CHECK(format_theta_sweep(sweep).find("theta") == 0);

  std::vector<std::string> progress;
  const AblationReport report = run_ablation(cfg, synthetic_schema(), c.train, c.dev, {}, aff, {1},
                                             [&](const std::string& m) { progress.push_back(m); });
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].variant == "full");
  CHECK(report.rows[0].delta == 0.0);
  CHECK(progress.size() == 3);
  CHECK(report.to_text().find("unweighted_pronoun_edges") != std::string::npos);
}

TEST_CASE("median") {
  CHECK(median({}) == 0.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0}) == 2.5);
}
