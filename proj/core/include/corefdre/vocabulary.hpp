// Lowercased word vocabulary with a reserved unknown row at id 0.
#pragma once

#include "corefdre/corpus.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace corefdre {

class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr const char* kUnknownWord = "<unk>";

  Vocabulary();
  // Restores a vocabulary from its word list (id order); entry 0 must be <unk>.
  explicit Vocabulary(std::vector<std::string> words);

  // Reserved items first (in the given order), then every corpus token in
  // lexicographic order.
  static Vocabulary build(const std::vector<Document>& corpus, const std::vector<std::string>& reserved = {});

  int add(const std::string& word);
  int id(const std::string& word) const;  // kUnknown when absent
  bool contains(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

std::string to_lower(const std::string& s);

}  // namespace corefdre
