// Synthetic documents with planted entities, relation facts and pronoun
// bridges, for desk-scale training and the ablation experiments.
//
// Each person gets an introduction sentence followed by fact sentences that
// name the person either directly or through "he"/"she"; organisations do the
// same with "it". A fact stated through a pronoun has no sentence in which
// both of its entities are named, so only the pronoun link connects them.
// Every planted pronoun is checked against the heuristic provider so that the
// provider's link is always the intended one.
#pragma once

#include "corefdre/corpus.hpp"

#include <cstdint>
#include <vector>

namespace corefdre {

struct SyntheticOptions {
  int documents = 30;
  std::uint64_t seed = 7;
  // Probability that a fact sentence refers to its subject with a pronoun.
  double pronoun_rate = 0.7;
  // Probability of a distractor sentence between entity blocks.
  double noise_rate = 0.35;
  int min_people = 2;
  int max_people = 3;
  int min_organisations = 1;
  int max_organisations = 2;
  int provider_window = 3;
  // Probability that a person's pronoun fact is preceded by a sentence naming
  // a person of the other gender. The heuristic provider, which knows entity
  // types but not gender, then links the pronoun to that person: a wrong link
  // the affinity scorer has to learn to distrust.
  double mislink_rate = 0.0;
};

// born_in, lives_in, works_for, based_in.
RelationSchema synthetic_schema();

std::vector<Document> generate_synthetic(const SyntheticOptions& options);

// Share of facts whose two entities are never named in the same sentence.
double pronoun_only_fraction(const std::vector<Document>& docs);

// Distinct lowercased tokens.
int distinct_words(const std::vector<Document>& docs);

}  // namespace corefdre
