#include "doctest.h"
#include "test_support.hpp"

#include <filesystem>
#include <fstream>

using namespace corefdre;
using namespace corefdre::testing;

namespace {

const char* kOneDoc = R"([{
  "title": "biography",
  "sents": [["Colette", "de", "Jouvenel", "was", "a", "French", "writer", "."],
            ["She", "was", "born", "in", "Castel-Novel", "."]],
  "vertexSet": [[{"name": "Colette de Jouvenel", "sent_id": 0, "pos": [0, 3], "type": "PER"}],
                [{"name": "Castel-Novel", "sent_id": 1, "pos": [4, 5], "type": "LOC"}]],
  "labels": [{"h": 0, "t": 1, "r": "place_of_birth", "evidence": [0, 1]}]
}])";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("corpus parses into the document model") {
  const auto docs = parse_corpus(kOneDoc, biography_schema());
  REQUIRE(docs.size() == 1);
  CHECK(docs[0] == biography_fixture());
  CHECK(docs[0].token_count() == 14);
  CHECK(docs[0].token_offset(1) == 8);
  CHECK(docs[0].mention_count() == 2);
}

TEST_CASE("corpus serialisation is canonical") {
  const auto docs = parse_corpus(kOneDoc, biography_schema());
  const std::string once = serialize_corpus(docs, biography_schema());
  const auto again = parse_corpus(once, biography_schema());
  CHECK(again == docs);
  CHECK(serialize_corpus(again, biography_schema()) == once);
}

TEST_CASE("corpus errors name the document and field") {
  const RelationSchema schema = biography_schema();
  auto expect_error = [&](const std::string& text, const std::string& fragment) {
    try {
      parse_corpus(text, schema);
      FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
      const std::string where = e.field_path() + " " + e.what();
      INFO(where);
      CHECK(where.find(fragment) != std::string::npos);
    }
  };
  expect_error("{", "not valid JSON");
  expect_error(replace(kOneDoc, "\"pos\": [4, 5]", "\"pos\": [4, 9]"), "vertexSet[1][0].pos");
  expect_error(replace(kOneDoc, "\"sent_id\": 1", "\"sent_id\": 7"), "sent_id");
  expect_error(replace(kOneDoc, "place_of_birth", "spouse"), "unknown relation label 'spouse'");
  expect_error(replace(kOneDoc, "\"h\": 0", "\"h\": 1"), "head equals tail");
  expect_error(replace(kOneDoc, "\"evidence\": [0, 1]", "\"evidence\": [0, 5]"), "evidence");
  expect_error(replace(kOneDoc, "\"name\": \"Castel-Novel\"", "\"name\": \"Paris\""), "surface does not match");
  expect_error(replace(kOneDoc, "\"title\": \"biography\",", ""), "title");
  try {
    parse_corpus(replace(kOneDoc, "\"pos\": [4, 5]", "\"pos\": [4, 9]"), schema);
  } catch (const CorpusError& e) {
    CHECK(e.document_index() == 0);
  }
}

TEST_CASE("surface comparison ignores whitespace differences") {
  const std::string spaced = replace(kOneDoc, "\"name\": \"Colette de Jouvenel\"", "\"name\": \"Colette  de Jouvenel\"");
  CHECK_NOTHROW(parse_corpus(spaced, biography_schema()));
}

TEST_CASE("validation returns all violations as data") {
  Document d = biography_fixture();
  CHECK(validate_document(d).empty());
  d.entities[1].mentions[0].span_end = 99;
  d.facts[0].tail_entity = 5;
  const auto problems = validate_document(d);
  CHECK(problems.size() >= 2);
  Document r = biography_fixture();
  r.facts[0].relation_id = 9;
  CHECK(validate_document(r).empty());
  CHECK(validate_document(r, biography_schema()).size() == 1);
}

TEST_CASE("overlapping spans across entities are a warning, not an error") {
  Document d = biography_fixture();
  d.entities.push_back(Entity{2, "PER", {mention(2, 0, 0, 3, "Colette de Jouvenel", "PER")}});
  CHECK(validate_document(d).empty());
  CHECK(overlap_warnings(d).size() == 1);
}

TEST_CASE("relation schema") {
  const RelationSchema s = biography_schema();
  CHECK(s.size() == 4);
  CHECK(s.index_of("employer") == 2);
  CHECK_FALSE(s.index_of("spouse").has_value());
  CHECK_THROWS_AS(RelationSchema({"a", "a"}), CorpusError);
  const auto path = std::filesystem::temp_directory_path() / "corefdre_schema_test.json";
  {
    std::ofstream out(path);
    out << serialize_schema(s);
  }
  CHECK(RelationSchema::load(path) == s);
  std::filesystem::remove(path);
}

TEST_CASE("shared fact keys normalise case and whitespace") {
  Document a = biography_fixture();
  Document b = biography_fixture();
  b.entities[0].mentions[0].surface = "colette  DE jouvenel";
  CHECK(fact_key(a, 0, 1, 0) == fact_key(b, 0, 1, 0));
  CHECK(normalized_entity_key(b, 0) == "colette de jouvenel");
  const SharedFactIndex idx = build_shared_fact_index({a});
  CHECK(idx.contains(fact_key(b, 0, 1, 0)));
  CHECK_FALSE(idx.contains(fact_key(b, 0, 1, 1)));
}

TEST_CASE("all_mentions enumerates in entity then mention order") {
  Document d = biography_fixture();
  d.entities[0].mentions.push_back(mention(0, 1, 0, 1, "She", "PER"));
  const auto refs = all_mentions(d);
  REQUIRE(refs.size() == 3);
  CHECK(refs[1] == MentionRef{0, 1});
  CHECK(refs[2] == MentionRef{1, 0});
}
