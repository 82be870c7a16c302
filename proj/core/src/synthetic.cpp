#include "corefdre/synthetic.hpp"

#include "corefdre/coref.hpp"
#include "corefdre/encoding.hpp"
#include "corefdre/parameters.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace corefdre {

namespace {

enum Relation { kBornIn = 0, kLivesIn = 1, kWorksFor = 2, kBasedIn = 3 };

const std::vector<std::string> kWomen = {"Alice", "Maria", "Elena", "Clara", "Nora", "Irene",
                                         "Lucia", "Vera",  "Greta", "Hanna", "Olga", "Rosa"};
const std::vector<std::string> kMen = {"Boris", "Carlos", "David", "Emil",  "Felix", "Hugo",
                                       "Ivan",  "Jonas",  "Karl",  "Pavel", "Simon", "Tomas"};
const std::vector<std::string> kPlaces = {
    "Paris",   "Rome",    "Berlin",  "Madrid",  "Vienna",    "Prague",   "Lisbon",   "Oslo",
    "Dublin",  "Warsaw",  "Athens",  "Zurich",  "Geneva",    "Milan",    "Lyon",     "Porto",
    "Bergen",  "Krakow",  "Seville", "Munich",  "Naples",    "Turin",    "Hamburg",  "Ghent",
    "Bruges",  "Malmo",   "Tallinn", "Riga",    "Vilnius",   "Sintra",   "Bologna",  "Valencia",
    "Utrecht", "Leipzig", "Gdansk",  "Aarhus",  "Salzburg",  "Florence", "Granada",  "Antwerp"};
const std::vector<std::string> kOrganisations = {
    "Acme",   "Globex",  "Initech", "Umbrella", "Hooli",           "Vandelay", "Wonka",  "Stark",
    "Wayne",  "Cyberdyne", "Soylent", "Tyrell", "Monarch",         "Oscorp",   "Aperture", "Massive Dynamic",
    "Nakatomi", "Gekko", "Virtucon", "Prestige", "Dunder Mifflin", "Sterling", "Pied Piper", "Oceanic"};
const std::vector<std::string> kProfessions = {
    "writer",   "painter",  "doctor",   "teacher",   "singer",    "lawyer",  "chemist",   "pilot",
    "engineer", "architect", "farmer",  "banker",    "sculptor",  "nurse",   "physicist", "composer",
    "dentist",  "editor",    "surgeon", "economist", "historian", "actor",   "baker",     "sailor"};
const std::vector<std::string> kKinds = {"software", "shipping", "mining",     "textile",
                                         "insurance", "publishing", "railway", "energy"};
const std::vector<std::string> kAdjectives = {"mild", "cold", "warm", "dry", "wet", "long", "short", "quiet", "busy"};
const std::vector<std::string> kSeasons = {"winter", "summer", "spring", "autumn"};

// One sentence under construction: words, and the entity each word names.
struct Piece {
  std::string text;
  int entity = -1;  // -1: plain words
};

struct PlannedPronoun {
  int sentence = 0;
  int position = 0;
  int entity = 0;
};

class DocumentBuilder {
 public:
  explicit DocumentBuilder(std::string doc_id) { doc_.doc_id = std::move(doc_id); }

  int entity(const std::string& name, const std::string& type) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(doc_.entities.size());
    doc_.entities.push_back(Entity{id, type, {}});
    ids_[name] = id;
    return id;
  }

  // Returns the sentence index. A pronoun piece ("he"/"she"/"it") with an
  // entity records a planned link instead of a mention; `link_to` overrides
  // the entity the provider is expected to link it to.
  int sentence(const std::vector<Piece>& pieces, bool pronoun_subject = false, int link_to = -1) {
    const int s = static_cast<int>(doc_.sentences.size());
    std::vector<Token> tokens;
    for (size_t k = 0; k < pieces.size(); ++k) {
      const Piece& p = pieces[k];
      std::istringstream words(p.text);
      const int start = static_cast<int>(tokens.size());
      std::string w;
      while (words >> w) tokens.push_back(Token{w, s, static_cast<int>(tokens.size())});
      const int end = static_cast<int>(tokens.size());
      if (p.entity < 0) continue;
      if (pronoun_subject && k == 0) {
        planned_.push_back({s, start, link_to >= 0 ? link_to : p.entity});
        continue;
      }
      Entity& e = doc_.entities[static_cast<size_t>(p.entity)];
      e.mentions.push_back(Mention{p.entity, s, start, end, p.text, e.entity_type});
    }
    doc_.sentences.push_back(std::move(tokens));
    return s;
  }

  void fact(int head, int tail, int relation, std::vector<int> evidence) {
    std::sort(evidence.begin(), evidence.end());
    evidence.erase(std::unique(evidence.begin(), evidence.end()), evidence.end());
    doc_.facts.push_back(RelationFact{head, tail, relation, std::move(evidence)});
  }

  const Document& doc() const { return doc_; }
  const std::vector<PlannedPronoun>& planned() const { return planned_; }

 private:
  Document doc_;
  std::map<std::string, int> ids_;
  std::vector<PlannedPronoun> planned_;
};

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.index(items.size())];
}

std::vector<std::string> pick_distinct(const std::vector<std::string>& pool, size_t n, Rng& rng) {
  std::vector<std::string> copy = pool;
  rng.shuffle(copy);
  copy.resize(std::min(n, copy.size()));
  return copy;
}

struct PlannedFact {
  int relation = 0;
  int tail = 0;
  std::string tail_name;
};

struct Block {
  int entity = 0;
  std::string name;
  bool person = true;
  std::string pronoun;
  std::vector<PlannedFact> facts;
};

Piece subject_piece(const Block& b, bool use_pronoun) { return {use_pronoun ? b.pronoun : b.name, b.entity}; }

std::string with_article(const std::string& noun) {
  const bool vowel = !noun.empty() && std::string("aeiou").find(noun[0]) != std::string::npos;
  return (vowel ? "an " : "a ") + noun;
}

std::vector<Piece> fact_sentence(const Block& b, const PlannedFact& f, bool use_pronoun, Rng& rng) {
  const Piece subject = subject_piece(b, use_pronoun);
  const Piece tail{f.tail_name, f.tail};
  const bool alt = rng.uniform() < 0.5;
  switch (f.relation) {
    case kBornIn:
      return {subject, {"was born in"}, tail, {"."}};
    case kLivesIn:
      return alt ? std::vector<Piece>{subject, {"now lives in"}, tail, {"."}}
                 : std::vector<Piece>{subject, {"moved to"}, tail, {"some years ago ."}};
    case kWorksFor:
      return alt ? std::vector<Piece>{subject, {"works for"}, tail, {"."}}
                 : std::vector<Piece>{subject, {"joined"}, tail, {"as " + with_article(pick(kProfessions, rng)) + " ."}};
    default:
      return alt ? std::vector<Piece>{subject, {"is based in"}, tail, {"."}}
                 : std::vector<Piece>{subject, {"opened its main office in"}, tail, {"."}};
  }
}

std::vector<Piece> intro_sentence(const Block& b, Rng& rng) {
  if (b.person) {
    if (rng.uniform() < 0.5) return {{b.name, b.entity}, {"is " + with_article(pick(kProfessions, rng)) + " ."}};
    return {{b.name, b.entity}, {"is a well known " + pick(kProfessions, rng) + " ."}};
  }
  if (rng.uniform() < 0.5) return {{b.name, b.entity}, {"is " + with_article(pick(kKinds, rng)) + " company ."}};
  return {{b.name, b.entity}, {"was founded as a small " + pick(kKinds, rng) + " firm ."}};
}

// Every planned pronoun must be linked by the provider to its entity.
bool links_as_planned(const Document& doc, const std::vector<PlannedPronoun>& planned, int window) {
  const auto pronouns = detect_pronouns(doc, PronounLexicon::default_lexicon());
  const auto pairs = HeuristicProvider(window).propose(doc, pronouns);
  for (const PlannedPronoun& p : planned) {
    bool ok = false;
    for (const MentionPronounPair& pair : pairs) {
      const PronounOccurrence& occ = pronouns[static_cast<size_t>(pair.pronoun)];
      if (occ.sentence_index == p.sentence && occ.position == p.position) ok = pair.mention.entity == p.entity;
    }
    if (!ok) return false;
  }
  return true;
}

Document generate_document(const SyntheticOptions& options, Rng& rng, const std::string& doc_id) {
  const auto range = [&](int lo, int hi) { return lo + static_cast<int>(rng.index(static_cast<size_t>(hi - lo + 1))); };
  const int people = range(options.min_people, options.max_people);
  const int organisations = range(options.min_organisations, options.max_organisations);

  std::vector<std::pair<std::string, bool>> persons;  // name, female
  for (int i = 0; i < people; ++i) {
    while (true) {
      const bool female = rng.uniform() < 0.5;
      const std::string& name = pick(female ? kWomen : kMen, rng);
      if (std::none_of(persons.begin(), persons.end(), [&](const auto& p) { return p.first == name; })) {
        persons.emplace_back(name, female);
        break;
      }
    }
  }
  const auto orgs = pick_distinct(kOrganisations, static_cast<size_t>(organisations), rng);
  const auto places = pick_distinct(kPlaces, 4, rng);

  std::vector<Block> blocks;
  for (const auto& [name, female] : persons) {
    Block b{0, name, true, female ? "she" : "he", {}};
    std::vector<int> relations = {kBornIn, kLivesIn, kWorksFor};
    rng.shuffle(relations);
    relations.resize(2);
    std::sort(relations.begin(), relations.end());
    std::vector<std::string> spots = pick_distinct(places, 2, rng);
    for (int r : relations) {
      if (r == kWorksFor) b.facts.push_back({r, 0, pick(orgs, rng)});
      else b.facts.push_back({r, 0, r == kBornIn ? spots[0] : spots[1]});
    }
    blocks.push_back(std::move(b));
  }
  for (const std::string& name : orgs) blocks.push_back(Block{0, name, false, "it", {{kBasedIn, 0, pick(places, rng)}}});
  rng.shuffle(blocks);

  DocumentBuilder builder(doc_id);
  for (Block& b : blocks) {
    if (rng.uniform() < options.noise_rate) {
      switch (rng.index(3)) {
        case 0:
          builder.sentence({{"the weather was " + pick(kAdjectives, rng) + " that year ."}});
          break;
        case 1:
          builder.sentence({{"it was a " + pick(kAdjectives, rng) + " " + pick(kSeasons, rng) + " ."}});
          break;
        default: {
          const std::string& place = pick(places, rng);
          builder.sentence({{"it rained in"}, {place, builder.entity(place, "LOC")}, {"for many days ."}});
        }
      }
    }
    b.entity = builder.entity(b.name, b.person ? "PER" : "ORG");
    const int intro = builder.sentence(intro_sentence(b, rng));
    // The person the provider will link a "he"/"she" to: the most recently
    // named one.
    int antecedent = b.entity;
    for (PlannedFact& f : b.facts) {
      f.tail = builder.entity(f.tail_name, f.relation == kWorksFor ? "ORG" : "LOC");
      const bool use_pronoun = rng.uniform() < options.pronoun_rate;
      if (use_pronoun && b.person && rng.uniform() < options.mislink_rate) {
        const bool female = b.pronoun == "she";
        std::vector<std::string> others;
        for (const auto& [name, f2] : persons)
          if (f2 != female) others.push_back(name);
        if (!others.empty()) {
          const std::string& other = pick(others, rng);
          const std::string& place = pick(places, rng);
          antecedent = builder.entity(other, "PER");
          builder.sentence({{other, antecedent}, {"visited"}, {place, builder.entity(place, "LOC")}, {"last year ."}});
        }
      }
      if (!use_pronoun) antecedent = b.entity;
      const int s = builder.sentence(fact_sentence(b, f, use_pronoun, rng), use_pronoun, antecedent);
      builder.fact(b.entity, f.tail, f.relation, use_pronoun ? std::vector<int>{intro, s} : std::vector<int>{s});
    }
  }
  Document doc = builder.doc();
  if (!links_as_planned(doc, builder.planned(), options.provider_window)) return Document{};
  return doc;
}

}  // namespace

RelationSchema synthetic_schema() { return RelationSchema({"born_in", "lives_in", "works_for", "based_in"}); }

std::vector<Document> generate_synthetic(const SyntheticOptions& options) {
  if (options.documents < 0) throw std::invalid_argument("document count must be >= 0");
  if (options.min_people < 1 || options.max_people < options.min_people || options.min_organisations < 1 ||
      options.max_organisations < options.min_organisations)
    throw std::invalid_argument("invalid synthetic entity counts");
  Rng rng(options.seed);
  std::vector<Document> docs;
  for (int d = 0; d < options.documents; ++d) {
    const std::string id = "synthetic-" + std::to_string(options.seed) + "-" + std::to_string(d);
    Document doc;
    for (int attempt = 0; attempt < 1000 && doc.sentences.empty(); ++attempt) doc = generate_document(options, rng, id);
    if (doc.sentences.empty()) throw std::runtime_error("could not plant consistent pronoun links for " + id);
    docs.push_back(std::move(doc));
  }
  return docs;
}

double pronoun_only_fraction(const std::vector<Document>& docs) {
  std::size_t facts = 0;
  std::size_t bridged = 0;
  for (const Document& doc : docs) {
    for (const RelationFact& f : doc.facts) {
      ++facts;
      std::set<int> head;
      for (const Mention& m : doc.entities[static_cast<size_t>(f.head_entity)].mentions) head.insert(m.sentence_index);
      bool together = false;
      for (const Mention& m : doc.entities[static_cast<size_t>(f.tail_entity)].mentions)
        together = together || head.count(m.sentence_index) != 0;
      if (!together) ++bridged;
    }
  }
  return facts == 0 ? 0.0 : static_cast<double>(bridged) / static_cast<double>(facts);
}

int distinct_words(const std::vector<Document>& docs) {
  std::set<std::string> words;
  for (const Document& doc : docs)
    for (const auto& sentence : doc.sentences)
      for (const Token& t : sentence) words.insert(to_lower(t.surface));
  return static_cast<int>(words.size());
}

}  // namespace corefdre
