// Pronoun detection and mention-pronoun pair proposal.
#pragma once

#include "corefdre/corpus.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace corefdre {

enum class PronounClass {
  kPerson,  // first/second person and he/she forms: PER antecedents only
  kNeuter,  // it, its: anything but PER
  kPlural,  // we/they forms: any antecedent
};

class PronounLexicon {
 public:
  // The 18 forms: you your yours i me we our ours he him his she her they
  // their them it its.
  static PronounLexicon default_lexicon();
  // One lowercased pronoun per line; blank lines and '#' comments ignored.
  static PronounLexicon load(const std::filesystem::path& path);

  explicit PronounLexicon(std::set<std::string> forms) : forms_(std::move(forms)) {}

  bool contains(const std::string& lowercased) const { return forms_.count(lowercased) != 0; }
  const std::set<std::string>& forms() const { return forms_; }
  // Forms outside the built-in table are treated as plural (any antecedent).
  static PronounClass class_of(const std::string& lowercased);

 private:
  std::set<std::string> forms_;
};

// Entity type string that person pronouns require.
inline constexpr const char* kPersonType = "PER";

bool type_compatible(PronounClass cls, const std::string& entity_type);

struct PronounOccurrence {
  int sentence_index = 0;
  int position = 0;
  std::string surface;  // lowercased

  bool operator==(const PronounOccurrence&) const = default;
};

// Lexicon tokens, excluding positions covered by any annotated mention.
std::vector<PronounOccurrence> detect_pronouns(const Document& doc, const PronounLexicon& lexicon);

struct MentionPronounPair {
  MentionRef mention;
  int pronoun = 0;  // index into the document's pronoun list
  std::optional<double> affinity;

  bool operator==(const MentionPronounPair&) const = default;
};

class ProviderError : public std::runtime_error {
 public:
  ProviderError(std::string doc_id, const std::string& message)
      : std::runtime_error("coreference provider failed on '" + doc_id + "': " + message), doc_id_(std::move(doc_id)) {}
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::string doc_id_;
};

// Source of mention-pronoun links. Implementations must be deterministic for a
// given document.
class CorefProvider {
 public:
  virtual ~CorefProvider() = default;
  virtual std::string name() const = 0;
  virtual std::vector<MentionPronounPair> propose(const Document& doc,
                                                  std::span<const PronounOccurrence> pronouns) const = 0;
};

// Links each pronoun to the nearest preceding type-compatible mention at most
// `window` sentences back. Nearest means smallest sentence distance; ties go
// to the earlier start position, then the lower entity index.
class HeuristicProvider final : public CorefProvider {
 public:
  static constexpr int kDefaultWindow = 3;

  explicit HeuristicProvider(int window = kDefaultWindow) : window_(window) {}
  std::string name() const override { return "heuristic"; }
  std::vector<MentionPronounPair> propose(const Document& doc,
                                          std::span<const PronounOccurrence> pronouns) const override;
  int window() const { return window_; }

 private:
  int window_;
};

// Externally computed links keyed by doc_id, e.g. from a neural coreference
// system. Documents it does not know raise ProviderError.
class PrecomputedProvider final : public CorefProvider {
 public:
  struct Link {
    MentionRef mention;
    int sentence_index = 0;
    int position = 0;
  };

  void add(const std::string& doc_id, Link link) { links_[doc_id].push_back(link); }
  std::string name() const override { return "precomputed"; }
  std::vector<MentionPronounPair> propose(const Document& doc,
                                          std::span<const PronounOccurrence> pronouns) const override;

 private:
  std::map<std::string, std::vector<Link>> links_;
};

// Runs the provider and checks its output: every pair must reference an
// existing mention and detected pronoun. Duplicates are dropped, first wins.
// Invalid references raise ProviderError carrying the doc id.
std::vector<MentionPronounPair> propose_pairs(const Document& doc, std::span<const PronounOccurrence> pronouns,
                                              const CorefProvider& provider);

// As above, but a failing primary provider is replaced by `fallback`.
std::vector<MentionPronounPair> propose_pairs_with_fallback(const Document& doc,
                                                            std::span<const PronounOccurrence> pronouns,
                                                            const CorefProvider& primary,
                                                            const CorefProvider& fallback);

// ---- marked pair inputs ---------------------------------------------------

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kStartToken = "[START]";
inline constexpr const char* kEndToken = "[END]";

enum class PairOrder { kMentionFirst, kPronounFirst };

// c_l [START] target [END] c_r, with up to `radius` context tokens on each
// side, clamped to the target's sentence.
std::vector<std::string> marked_segment(const Document& doc, int sentence, int start, int end, int radius);

// [CLS] <mention> [SEP] <pronoun> [SEP] (or the pronoun segment first).
std::vector<std::string> build_pair_input(const Document& mention_doc, MentionRef mention,
                                          const Document& pronoun_doc, const PronounOccurrence& pronoun, int radius,
                                          PairOrder order = PairOrder::kMentionFirst);

}  // namespace corefdre
