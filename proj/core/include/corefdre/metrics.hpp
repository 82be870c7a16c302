// Micro precision / recall / F1 over relation-fact tuples, with Ign F1.
#pragma once

#include "corefdre/corpus.hpp"

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace corefdre {

// (document index, head, tail, relation).
struct FactTuple {
  int doc = 0;
  int head = 0;
  int tail = 0;
  int relation = 0;

  auto operator<=>(const FactTuple&) const = default;
};

struct Scores {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 counts as 0 for each ratio.
Scores score_counts(std::size_t correct, std::size_t predicted, std::size_t gold);
Scores score_sets(const std::set<FactTuple>& predicted, const std::set<FactTuple>& gold);

std::set<FactTuple> gold_tuples(const std::vector<Document>& docs);

struct EvalReport {
  Scores overall;
  // Tuples whose normalised (head, relation, tail) key occurs in the shared
  // index are dropped from both sides before scoring.
  Scores ignore_shared;
  std::vector<Scores> per_relation;
  double threshold = 0.5;

  double f1() const { return overall.f1; }
  double ign_f1() const { return ignore_shared.f1; }
};

EvalReport score_predictions(const std::vector<Document>& docs, const std::set<FactTuple>& predicted, int relations,
                             const SharedFactIndex& shared);

std::string format_report(const EvalReport& report, const RelationSchema& schema);

}  // namespace corefdre
