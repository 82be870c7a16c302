// Mention-pronoun affinity scorer: marked pair inputs, a symmetric pair
// encoder, a linear-plus-sigmoid head, and triplet-style training on provider
// pairs against mention-replaced negatives.
#pragma once

#include "corefdre/archive.hpp"
#include "corefdre/autograd.hpp"
#include "corefdre/coref.hpp"
#include "corefdre/parameters.hpp"
#include "corefdre/vocabulary.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

enum class AffinityLoss {
  // aff(m', p)^2 + (1 - aff(m, p))^2: drives negatives to 0 and positives to 1.
  kSquaredContrastive,
  // max(0, aff(m', p)^2 - (1 - aff(m, p))^2), the hinge exactly as printed.
  kHingeSquared,
};

std::string to_string(AffinityLoss loss);
AffinityLoss parse_affinity_loss(const std::string& name);

struct AffinityConfig {
  int embed_dim = 32;
  int hidden_dim = 32;
  int context_radius = 10;
  int positives = 300;
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.003;
  AffinityLoss loss = AffinityLoss::kSquaredContrastive;

  std::string to_text() const;
  static AffinityConfig from_text(const std::string& text);
  bool operator==(const AffinityConfig&) const = default;
};

// Pronouns and provider pairs for every document of a corpus, index-aligned.
struct CorpusPairs {
  std::vector<std::vector<PronounOccurrence>> pronouns;
  std::vector<std::vector<MentionPronounPair>> pairs;

  std::size_t pair_count() const;
};

CorpusPairs collect_pairs(const std::vector<Document>& corpus, const PronounLexicon& lexicon,
                          const CorefProvider& provider);

// One positive (provider pair) and its negative: the same pronoun paired with
// a replaced mention.
struct PairSample {
  int doc = 0;
  int pronoun = 0;
  MentionRef positive;
  int negative_doc = 0;
  MentionRef negative;

  bool operator==(const PairSample&) const = default;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Draws `positives` provider pairs uniformly without replacement. Each
// negative mention is drawn uniformly from the other entities of the same
// document; when the document has a single entity it is drawn from a
// different document instead.
std::vector<PairSample> sample_training_pairs(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                                              int positives, std::uint64_t seed);

class AffinityModel {
 public:
  AffinityModel(Vocabulary vocab, AffinityConfig config, std::uint64_t seed);

  // Default vocabulary: the four sentinels plus every corpus token.
  static Vocabulary make_vocabulary(const std::vector<Document>& corpus);

  double score(const Document& mention_doc, MentionRef mention, const Document& pronoun_doc,
               const PronounOccurrence& pronoun) const;

  // Affinity for a batch of pairs given both input orders; returns n x 1.
  Var score_batch(Tape& tape, std::span<const std::vector<std::string>> mention_first,
                  std::span<const std::vector<std::string>> pronoun_first) const;

  // Fills `affinity` for every pair of one document.
  void annotate(const Document& doc, std::span<const PronounOccurrence> pronouns,
                std::vector<MentionPronounPair>& pairs) const;

  const AffinityConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  Archive to_archive() const;
  static AffinityModel from_archive(const Archive& archive);

 private:
  AffinityModel(Vocabulary vocab, AffinityConfig config, ParameterStore params);
  Var encode(Tape& tape, std::span<const std::vector<std::string>> sequences) const;

  Vocabulary vocab_;
  AffinityConfig config_;
  ParameterStore params_;
};

// Loss over aligned positive / negative affinity columns (n x 1 each).
Var affinity_loss(Var positive, Var negative, AffinityLoss kind);
double affinity_loss_term(double positive, double negative, AffinityLoss kind);

// Total loss of `samples` under the model.
double affinity_loss(const AffinityModel& model, const std::vector<Document>& corpus, const CorpusPairs& pairs,
                     std::span<const PairSample> samples);
Var affinity_loss(Tape& tape, const AffinityModel& model, const std::vector<Document>& corpus,
                  const CorpusPairs& pairs, std::span<const PairSample> samples);

class AffinityTrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AffinityTrainingLog {
  // Full-sample loss before training followed by one entry per epoch.
  std::vector<double> epoch_loss;
  double mean_positive = 0.0;
  double mean_negative = 0.0;
};

AffinityModel train_affinity(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                             const AffinityConfig& config, std::uint64_t seed, AffinityTrainingLog* log = nullptr);

// Same, on an explicit sample list (the model is initialised from `seed`).
AffinityModel train_affinity_on(const std::vector<Document>& corpus, const CorpusPairs& pairs,
                                std::span<const PairSample> samples, const AffinityConfig& config,
                                std::uint64_t seed, AffinityTrainingLog* log = nullptr);

}  // namespace corefdre
