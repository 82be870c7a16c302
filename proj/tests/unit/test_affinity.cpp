#include "doctest.h"
#include "test_support.hpp"

#include "corefdre/affinity.hpp"
#include "corefdre/synthetic.hpp"

using namespace corefdre;
using namespace corefdre::testing;

namespace {

struct SmallCorpus {
  std::vector<Document> docs;
  CorpusPairs pairs;

  SmallCorpus() {
    SyntheticOptions opt;
    opt.documents = 6;
    opt.seed = 11;
    docs = generate_synthetic(opt);
    pairs = collect_pairs(docs, PronounLexicon::default_lexicon(), HeuristicProvider());
  }
};

AffinityConfig tiny_config() {
  AffinityConfig c;
  c.embed_dim = 6;
  c.hidden_dim = 5;
  c.context_radius = 2;
  c.epochs = 4;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_CASE("loss terms on a worked example") {
  // positive 0.9, negative 0.8: 0.64 - 0.01 for the hinge, 0.64 + 0.01 otherwise.
  CHECK(affinity_loss_term(0.9, 0.8, AffinityLoss::kHingeSquared) == doctest::Approx(0.63).epsilon(1e-12));
  CHECK(affinity_loss_term(0.9, 0.8, AffinityLoss::kSquaredContrastive) == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(affinity_loss_term(0.9, 0.05, AffinityLoss::kHingeSquared) == 0.0);
  CHECK(parse_affinity_loss(to_string(AffinityLoss::kHingeSquared)) == AffinityLoss::kHingeSquared);
  CHECK_THROWS(parse_affinity_loss("triplet"));
}

TEST_CASE("zero head scores exactly one half") {
  const Document d = biography_fixture();
  AffinityModel model(AffinityModel::make_vocabulary({d}), tiny_config(), 3);
  model.params().get("affinity.head.weight").value().setZero();
  const auto pronouns = detect_pronouns(d, PronounLexicon::default_lexicon());
  CHECK(model.score(d, {0, 0}, d, pronouns[0]) == 0.5);
}

TEST_CASE("affinity is symmetric in the input order") {
  const Document d = biography_fixture();
  AffinityModel model(AffinityModel::make_vocabulary({d}), tiny_config(), 5);
  model.params().get("affinity.head.bias").value()(0, 0) = 0.3;
  const auto pronouns = detect_pronouns(d, PronounLexicon::default_lexicon());
  std::vector<std::vector<std::string>> mf{build_pair_input(d, {0, 0}, d, pronouns[0], 2, PairOrder::kMentionFirst)};
  std::vector<std::vector<std::string>> pf{build_pair_input(d, {0, 0}, d, pronouns[0], 2, PairOrder::kPronounFirst)};
  Tape t(false);
  const double forward = model.score_batch(t, mf, pf).scalar();
  const double swapped = model.score_batch(t, pf, mf).scalar();
  CHECK(forward == doctest::Approx(swapped).epsilon(1e-15));
  CHECK(forward == doctest::Approx(model.score(d, {0, 0}, d, pronouns[0])).epsilon(1e-15));
}

TEST_CASE("training pair sampling") {
  SmallCorpus c;
  REQUIRE(c.pairs.pair_count() >= 5);

  const auto a = sample_training_pairs(c.docs, c.pairs, 5, 9);
  const auto b = sample_training_pairs(c.docs, c.pairs, 5, 9);
  CHECK(a == b);
  for (const PairSample& s : a) {
    CHECK(s.negative_doc == s.doc);
    CHECK(s.negative.entity != s.positive.entity);
  }
  CHECK_THROWS_AS(sample_training_pairs(c.docs, c.pairs, static_cast<int>(c.pairs.pair_count()) + 1, 9),
                  SamplingError);
  CHECK_THROWS_AS(sample_training_pairs(c.docs, c.pairs, -1, 9), SamplingError);
}

TEST_CASE("single-entity documents borrow their negative from another document") {
  Document lonely = biography_fixture();
  lonely.entities.pop_back();
  lonely.facts.clear();
  Document other = biography_fixture();
  other.doc_id = "other";
  const std::vector<Document> docs{lonely, other};
  const CorpusPairs pairs = collect_pairs(docs, PronounLexicon::default_lexicon(), HeuristicProvider());
  const auto samples = sample_training_pairs(docs, pairs, 2, 1);
  REQUIRE(samples.size() == 2);
  // Document 1 has a second entity of its own; document 0 has to look there.
  for (const PairSample& s : samples) CHECK(s.negative_doc == 1);
  CHECK_THROWS_AS(sample_training_pairs({lonely}, collect_pairs({lonely}, PronounLexicon::default_lexicon(),
                                                                HeuristicProvider()),
                                        1, 1),
                  SamplingError);
}

TEST_CASE("affinity loss gradients match finite differences") {
  SmallCorpus c;
  AffinityConfig cfg = tiny_config();
  for (AffinityLoss kind : {AffinityLoss::kSquaredContrastive, AffinityLoss::kHingeSquared}) {
    cfg.loss = kind;
    AffinityModel model(AffinityModel::make_vocabulary(c.docs), cfg, 2);
    // Push negatives up so that the hinge is active.
    model.params().get("affinity.head.bias").value()(0, 0) = 1.5;
    const auto samples = sample_training_pairs(c.docs, c.pairs, 4, 3);
    std::vector<Parameter*> params;
    for (Parameter& p : model.params().all())
      if (p.name() != "affinity.embeddings") params.push_back(&p);
    const GradCheck r = check_gradients(params, [&](Tape& t) { return affinity_loss(t, model, c.docs, c.pairs, samples); });
    INFO(to_string(kind), " ", r.worst);
    CHECK(r.max_relative_error <= 1e-5);
  }
}

TEST_CASE("affinity training") {
  SmallCorpus c;
  AffinityConfig cfg = tiny_config();
  cfg.positives = 1000;  // clamped to what the corpus offers

  SUBCASE("zero epochs returns the initialisation") {
    cfg.epochs = 0;
    const AffinityModel trained = train_affinity(c.docs, c.pairs, cfg, 4);
    const AffinityModel fresh(AffinityModel::make_vocabulary(c.docs), cfg, 4);
    CHECK(trained.to_archive().serialize() == fresh.to_archive().serialize());
  }
  SUBCASE("fixed seed is deterministic") {
    const AffinityModel a = train_affinity(c.docs, c.pairs, cfg, 4);
    const AffinityModel b = train_affinity(c.docs, c.pairs, cfg, 4);
    CHECK(a.to_archive().serialize() == b.to_archive().serialize());
  }
  SUBCASE("loss goes down and the archive round-trips") {
    cfg.epochs = 15;
    cfg.learning_rate = 0.02;
    AffinityTrainingLog log;
    const AffinityModel m = train_affinity(c.docs, c.pairs, cfg, 4, &log);
    REQUIRE(log.epoch_loss.size() == 16);
    CHECK(log.epoch_loss.back() < log.epoch_loss.front());
    CHECK(log.mean_positive > log.mean_negative);
    const std::string bytes = m.to_archive().serialize();
    CHECK(AffinityModel::from_archive(Archive::parse(bytes)).to_archive().serialize() == bytes);
  }
  SUBCASE("archives of another kind are rejected") {
    CHECK_THROWS_AS(AffinityModel::from_archive(Archive("model")), ArchiveError);
  }
}

TEST_CASE("annotate fills every pair") {
  SmallCorpus c;
  const AffinityModel m(AffinityModel::make_vocabulary(c.docs), tiny_config(), 8);
  auto pairs = c.pairs.pairs[0];
  REQUIRE_FALSE(pairs.empty());
  for (auto& p : pairs) p.affinity = -1.0;
  m.annotate(c.docs[0], c.pairs.pronouns[0], pairs);
  for (const auto& p : pairs) {
    CHECK(p.affinity > 0.0);
    CHECK(p.affinity < 1.0);
    CHECK(p.affinity == doctest::Approx(m.score(c.docs[0], p.mention, c.docs[0],
                                                c.pairs.pronouns[0][static_cast<size_t>(p.pronoun)]))
                            .epsilon(1e-12));
  }
}

TEST_CASE("affinity config text round trip") {
  AffinityConfig c = tiny_config();
  c.loss = AffinityLoss::kHingeSquared;
  CHECK(AffinityConfig::from_text(c.to_text()) == c);
  CHECK_THROWS_AS(AffinityConfig::from_text("embed_dim = many\n"), ConfigError);
}
