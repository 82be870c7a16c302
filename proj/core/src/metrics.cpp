#include "corefdre/metrics.hpp"

#include <iomanip>
#include <sstream>

namespace corefdre {

Scores score_counts(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Scores s;
  s.correct = correct;
  s.predicted = predicted;
  s.gold = gold;
  s.precision = predicted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted);
  s.recall = gold == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold);
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

Scores score_sets(const std::set<FactTuple>& predicted, const std::set<FactTuple>& gold) {
  std::size_t correct = 0;
  for (const FactTuple& t : predicted) correct += gold.count(t);
  return score_counts(correct, predicted.size(), gold.size());
}

std::set<FactTuple> gold_tuples(const std::vector<Document>& docs) {
  std::set<FactTuple> out;
  for (size_t d = 0; d < docs.size(); ++d)
    for (const RelationFact& f : docs[d].facts)
      out.insert({static_cast<int>(d), f.head_entity, f.tail_entity, f.relation_id});
  return out;
}

EvalReport score_predictions(const std::vector<Document>& docs, const std::set<FactTuple>& predicted, int relations,
                             const SharedFactIndex& shared) {
  EvalReport report;
  const std::set<FactTuple> gold = gold_tuples(docs);
  report.overall = score_sets(predicted, gold);

  auto is_shared = [&](const FactTuple& t) {
    return shared.contains(fact_key(docs[static_cast<size_t>(t.doc)], t.head, t.tail, t.relation));
  };
  std::set<FactTuple> kept_predicted;
  std::set<FactTuple> kept_gold;
  for (const FactTuple& t : predicted)
    if (!is_shared(t)) kept_predicted.insert(t);
  for (const FactTuple& t : gold)
    if (!is_shared(t)) kept_gold.insert(t);
  report.ignore_shared = score_sets(kept_predicted, kept_gold);

  for (int r = 0; r < relations; ++r) {
    std::set<FactTuple> p;
    std::set<FactTuple> g;
    for (const FactTuple& t : predicted)
      if (t.relation == r) p.insert(t);
    for (const FactTuple& t : gold)
      if (t.relation == r) g.insert(t);
    report.per_relation.push_back(score_sets(p, g));
  }
  return report;
}

std::string format_report(const EvalReport& report, const RelationSchema& schema) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "precision " << report.overall.precision << "  recall " << report.overall.recall << "  f1 "
      << report.overall.f1 << "  ign_f1 " << report.ignore_shared.f1 << "\n";
  out << "predicted " << report.overall.predicted << "  gold " << report.overall.gold << "  correct "
      << report.overall.correct << "  threshold " << report.threshold << "\n";
  for (size_t r = 0; r < report.per_relation.size(); ++r) {
    const Scores& s = report.per_relation[r];
    const std::string name = static_cast<int>(r) < schema.size() ? schema.label(static_cast<int>(r)) : std::to_string(r);
    out << "  " << std::left << std::setw(24) << name << std::right << " p " << s.precision << "  r " << s.recall
        << "  f1 " << s.f1 << "  (" << s.correct << "/" << s.predicted << "/" << s.gold << ")\n";
  }
  return out.str();
}

}  // namespace corefdre
