#pragma once

#include <map>
#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/seq2seq.hpp"

namespace udkit {

// Most frequent expansion per lowercased token form; ties go to the
// expansion seen first in the training data.
struct ExpansionEntry {
  std::vector<std::string> words;  // lowercased
  long count = 0;                  // occurrences of this expansion
};

struct ExpansionLexicon {
  std::map<std::string, ExpansionEntry> entries;
  const ExpansionEntry* find(const std::string& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  }
};

ExpansionLexicon build_lexicon(const conllu::Document& train);

// Text format, sorted by form: form<TAB>word1 word2 ...<TAB>count
void save_lexicon(const ExpansionLexicon& lex, const std::string& path);
ExpansionLexicon load_lexicon(const std::string& path);

struct MwtModel {
  nn::ParamCollection pc;
  Seq2Seq s2s;
};

MwtModel make_mwt_model(const Seq2SeqConfig& cfg, Vocab symbols, uint64_t seed);
void save_mwt_model(const MwtModel& m, const std::string& path);
MwtModel load_mwt_model(const std::string& path);

enum class ExpandRoute {
  kDict = 0,       // verbatim dictionary hit
  kLowerDict = 1,  // hit after lowercasing
  kNeural = 2,     // beam-decoded
  kIdentity = 3,   // no dictionary entry and no model: token kept whole
};

// Dictionary, then lowercased dictionary, then the neural expander. Never
// returns an empty list. `model` may be null (dictionary-only operation).
// `probe_log` records attempted dictionary keys in order.
std::vector<std::string> expand(const std::string& form,
                                const ExpansionLexicon& lex,
                                const MwtModel* model,
                                ExpandRoute* route = nullptr,
                                std::vector<std::string>* probe_log = nullptr);

// Expands every token still flagged for expansion, renumbering word ids
// and rewriting heads through the id map (words inside an expanded token
// inherit no tree links).
void expand_document(conllu::Document& doc, const ExpansionLexicon& lex,
                     const MwtModel* model);

// Builds (form -> space-joined expansion) character examples and trains the
// seq2seq on them. The lexicon is built separately via build_lexicon.
MwtModel train_mwt(const conllu::Document& train, const conllu::Document& dev,
                   const Seq2SeqConfig& cfg, const Seq2SeqTrainConfig& tc);

}  // namespace udkit
