#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace udkit::conllu {

// One syntactic word (a regular CoNLL-U word line).
struct Word {
  int id = 0;            // 1-based within sentence
  std::string form;
  std::string lemma;     // empty means unset, serialized as "_"
  std::string upos;      // "_" or tag
  std::string xpos;      // "_" or tag
  std::string ufeats;    // canonical "Key=Val|Key=Val" or "_"
  int head = -1;         // -1 unset, 0 root, else head word id
  std::string deprel;    // "_" or label
  std::string deps;      // enhanced graph, kept verbatim, never produced
  std::string misc;      // "_"-free storage; empty means unset

  bool operator==(const Word&) const = default;
};

// A surface token covering words [start_id, end_id]. `mwt` marks tokens that
// span several words, or single-word tokens still awaiting expansion
// (serialized as MWT=Yes in MISC).
struct Token {
  int start_id = 0;
  int end_id = 0;
  std::string form;
  bool mwt = false;
  std::string misc;  // MISC of the range line (multi-word spans only)

  bool is_range() const { return end_id > start_id; }
  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Word> words;
  std::vector<Token> tokens;
  std::string text;                   // from "# text = ...", may be empty
  std::vector<std::string> comments;  // verbatim comment lines, in order

  const Word& word(int id) const { return words.at(static_cast<size_t>(id - 1)); }
  Word& word(int id) { return words.at(static_cast<size_t>(id - 1)); }
  bool operator==(const Sentence&) const = default;
};

struct Document {
  std::vector<Sentence> sentences;
  std::optional<std::string> raw_text;

  size_t word_count() const;
  bool operator==(const Document& o) const {
    return sentences == o.sentences;
  }
};

// Parses UFeats text into key/value pairs ("_" -> empty). Keys are returned
// sorted; duplicate keys keep the first value.
std::vector<std::pair<std::string, std::string>> parse_feats(const std::string& s);
std::string format_feats(std::vector<std::pair<std::string, std::string>> kv);
std::string canonical_feats(const std::string& s);

// MISC helpers (|-separated items).
bool misc_has(const std::string& misc, const std::string& item);
std::string misc_add(const std::string& misc, const std::string& item);
std::string misc_remove(const std::string& misc, const std::string& item);

Document read(std::istream& in);
Document read_file(const std::string& path);
Document read_string(const std::string& text);

// Serializes a document. Refuses structurally invalid documents.
void write(const Document& doc, std::ostream& out);
std::string write_string(const Document& doc);

// Structural validation: ids 1..n, token spans contiguous and covering.
// With `strict`, additionally requires every mwt token to be a real range
// and, when heads are annotated, a single-rooted acyclic tree.
void validate(const Document& doc, bool strict);
bool is_valid_tree(const std::vector<int>& heads);  // heads[i] for word i+1

// Deterministic dev split: with ratio k (default 7, meaning k:1), every
// (k+1)-th sentence goes to dev. Requires at least k+1 sentences.
std::pair<Document, Document> train_dev_split(const Document& doc, int ratio = 7);

}  // namespace udkit::conllu
