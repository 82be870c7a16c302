#include "corefdre/coref.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <tuple>

namespace corefdre {
namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

PronounLexicon PronounLexicon::default_lexicon() {
  return PronounLexicon({"you", "your", "yours", "i", "me", "we", "our", "ours", "he", "him", "his", "she", "her",
                         "they", "their", "them", "it", "its"});
}

PronounLexicon PronounLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pronoun lexicon " + path.string());
  std::set<std::string> forms;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    forms.insert(lowercase(line));
  }
  return PronounLexicon(std::move(forms));
}

PronounClass PronounLexicon::class_of(const std::string& w) {
  static const std::set<std::string> person = {"i", "me", "you", "your", "yours", "he", "him", "his", "she", "her"};
  static const std::set<std::string> neuter = {"it", "its"};
  if (person.count(w) != 0) return PronounClass::kPerson;
  if (neuter.count(w) != 0) return PronounClass::kNeuter;
  return PronounClass::kPlural;
}

bool type_compatible(PronounClass cls, const std::string& entity_type) {
  switch (cls) {
    case PronounClass::kPerson:
      return entity_type == kPersonType;
    case PronounClass::kNeuter:
      return entity_type != kPersonType;
    case PronounClass::kPlural:
      return true;
  }
  return false;
}

std::vector<PronounOccurrence> detect_pronouns(const Document& doc, const PronounLexicon& lexicon) {
  std::vector<std::vector<bool>> covered(doc.sentences.size());
  for (size_t s = 0; s < doc.sentences.size(); ++s) covered[s].assign(doc.sentences[s].size(), false);
  for (const Entity& e : doc.entities)
    for (const Mention& m : e.mentions)
      for (int k = m.span_start; k < m.span_end; ++k) covered[static_cast<size_t>(m.sentence_index)][static_cast<size_t>(k)] = true;

  std::vector<PronounOccurrence> out;
  for (size_t s = 0; s < doc.sentences.size(); ++s) {
    for (size_t k = 0; k < doc.sentences[s].size(); ++k) {
      if (covered[s][k]) continue;
      std::string w = lowercase(doc.sentences[s][k].surface);
      if (lexicon.contains(w)) out.push_back(PronounOccurrence{static_cast<int>(s), static_cast<int>(k), std::move(w)});
    }
  }
  return out;
}

std::vector<MentionPronounPair> HeuristicProvider::propose(const Document& doc,
                                                           std::span<const PronounOccurrence> pronouns) const {
  std::vector<MentionPronounPair> out;
  const auto mentions = all_mentions(doc);
  for (size_t p = 0; p < pronouns.size(); ++p) {
    const PronounOccurrence& pron = pronouns[p];
    const PronounClass cls = PronounLexicon::class_of(pron.surface);
    std::optional<std::tuple<int, int, int, MentionRef>> best;  // (distance, sentence, start, ref)
    for (const MentionRef& ref : mentions) {
      const Mention& m = mention_at(doc, ref);
      const int distance = pron.sentence_index - m.sentence_index;
      if (distance < 0 || distance > window_) continue;
      if (distance == 0 && m.span_end > pron.position) continue;  // must precede the pronoun
      if (!type_compatible(cls, m.entity_type)) continue;
      auto key = std::make_tuple(distance, m.sentence_index, m.span_start, ref);
      if (!best || key < *best) best = key;
    }
    if (best) out.push_back(MentionPronounPair{std::get<3>(*best), static_cast<int>(p), std::nullopt});
  }
  return out;
}

std::vector<MentionPronounPair> PrecomputedProvider::propose(const Document& doc,
                                                             std::span<const PronounOccurrence> pronouns) const {
  auto it = links_.find(doc.doc_id);
  if (it == links_.end()) throw ProviderError(doc.doc_id, "no precomputed links for document");
  std::vector<MentionPronounPair> out;
  for (const Link& link : it->second) {
    int found = -1;
    for (size_t p = 0; p < pronouns.size(); ++p)
      if (pronouns[p].sentence_index == link.sentence_index && pronouns[p].position == link.position)
        found = static_cast<int>(p);
    if (found < 0)
      throw ProviderError(doc.doc_id, "link to sentence " + std::to_string(link.sentence_index) + " position " +
                                          std::to_string(link.position) + " is not a detected pronoun");
    out.push_back(MentionPronounPair{link.mention, found, std::nullopt});
  }
  return out;
}

std::vector<MentionPronounPair> propose_pairs(const Document& doc, std::span<const PronounOccurrence> pronouns,
                                              const CorefProvider& provider) {
  std::vector<MentionPronounPair> raw = provider.propose(doc, pronouns);
  std::vector<MentionPronounPair> out;
  std::set<std::pair<MentionRef, int>> seen;
  for (const MentionPronounPair& pair : raw) {
    const bool mention_ok = pair.mention.entity >= 0 && pair.mention.entity < static_cast<int>(doc.entities.size()) &&
                            pair.mention.mention >= 0 &&
                            pair.mention.mention <
                                static_cast<int>(doc.entities[static_cast<size_t>(pair.mention.entity)].mentions.size());
    if (!mention_ok)
      throw ProviderError(doc.doc_id, "pair references missing mention (" + std::to_string(pair.mention.entity) +
                                          ", " + std::to_string(pair.mention.mention) + ")");
    if (pair.pronoun < 0 || pair.pronoun >= static_cast<int>(pronouns.size()))
      throw ProviderError(doc.doc_id, "pair references missing pronoun " + std::to_string(pair.pronoun));
    if (pair.affinity && (*pair.affinity < 0.0 || *pair.affinity > 1.0))
      throw ProviderError(doc.doc_id, "affinity outside [0, 1]");
    if (seen.insert({pair.mention, pair.pronoun}).second) out.push_back(pair);
  }
  return out;
}

std::vector<MentionPronounPair> propose_pairs_with_fallback(const Document& doc,
                                                            std::span<const PronounOccurrence> pronouns,
                                                            const CorefProvider& primary,
                                                            const CorefProvider& fallback) {
  try {
    return propose_pairs(doc, pronouns, primary);
  } catch (const ProviderError&) {
    return propose_pairs(doc, pronouns, fallback);
  }
}

std::vector<std::string> marked_segment(const Document& doc, int sentence, int start, int end, int radius) {
  const auto& sent = doc.sentences.at(static_cast<size_t>(sentence));
  const int left = std::max(0, start - radius);
  const int right = std::min(static_cast<int>(sent.size()), end + radius);
  std::vector<std::string> out;
  for (int k = left; k < start; ++k) out.push_back(sent[static_cast<size_t>(k)].surface);
  out.emplace_back(kStartToken);
  for (int k = start; k < end; ++k) out.push_back(sent[static_cast<size_t>(k)].surface);
  out.emplace_back(kEndToken);
  for (int k = end; k < right; ++k) out.push_back(sent[static_cast<size_t>(k)].surface);
  return out;
}

std::vector<std::string> build_pair_input(const Document& mention_doc, MentionRef mention,
                                          const Document& pronoun_doc, const PronounOccurrence& pronoun, int radius,
                                          PairOrder order) {
  const Mention& m = mention_at(mention_doc, mention);
  auto mseg = marked_segment(mention_doc, m.sentence_index, m.span_start, m.span_end, radius);
  auto pseg = marked_segment(pronoun_doc, pronoun.sentence_index, pronoun.position, pronoun.position + 1, radius);
  const auto& first = order == PairOrder::kMentionFirst ? mseg : pseg;
  const auto& second = order == PairOrder::kMentionFirst ? pseg : mseg;
  std::vector<std::string> out;
  out.reserve(first.size() + second.size() + 3);
  out.emplace_back(kClsToken);
  out.insert(out.end(), first.begin(), first.end());
  out.emplace_back(kSepToken);
  out.insert(out.end(), second.begin(), second.end());
  out.emplace_back(kSepToken);
  return out;
}

}  // namespace corefdre
