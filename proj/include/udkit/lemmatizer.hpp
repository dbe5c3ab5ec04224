#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/seq2seq.hpp"

namespace udkit {

struct LemmaEntry {
  std::string lemma;
  long count = 0;  // occurrences of this lemma under the key
  bool operator==(const LemmaEntry&) const = default;
};

// Modal lemma per (word, UPOS) pair and per word. Keys keep their case;
// ties go to the lemma seen first in the training data.
struct LemmaLexicon {
  std::map<std::pair<std::string, std::string>, LemmaEntry> pair_map;
  std::map<std::string, LemmaEntry> word_map;

  const LemmaEntry* find(const std::string& word, const std::string& upos) const {
    auto it = pair_map.find({word, upos});
    return it == pair_map.end() ? nullptr : &it->second;
  }
  const LemmaEntry* find(const std::string& word) const {
    auto it = word_map.find(word);
    return it == word_map.end() ? nullptr : &it->second;
  }
};

LemmaLexicon build_lemma_lexicons(const conllu::Document& train);

// Text format, sorted within each kind:
//   P<TAB>word<TAB>upos<TAB>lemma<TAB>count
//   W<TAB>word<TAB>lemma<TAB>count
void save_lemma_lexicon(const LemmaLexicon& lex, const std::string& path);
LemmaLexicon load_lemma_lexicon(const std::string& path);

// Greedy assignment: identity, then lowercase, then the sequence decoder.
enum class EditLabel { kIdentity = 0, kLowercase = 1, kSeq2Seq = 2 };
EditLabel assign_edit_label(const std::string& word, const std::string& lemma);

// Character seq2seq plus a 3-way edit classifier over the concatenated
// encoder final states (FC with ReLU, then a linear layer).
struct LemmatizerModel {
  nn::ParamCollection pc;
  Seq2Seq s2s;
  nn::Param* edit_w1 = nullptr;  // (2*enc_hidden) x (2*enc_hidden)
  nn::Param* edit_b1 = nullptr;
  nn::Param* edit_w2 = nullptr;  // 3 x (2*enc_hidden)
  nn::Param* edit_b2 = nullptr;
};

Seq2SeqConfig lemmatizer_defaults();           // 50d emb, 100d/dir enc, 200d dec
Seq2SeqTrainConfig lemmatizer_train_defaults();  // up to 60 epochs

LemmatizerModel make_lemmatizer(const Seq2SeqConfig& cfg, Vocab symbols,
                                uint64_t seed);
void save_lemmatizer(const LemmatizerModel& m, const std::string& path);
LemmatizerModel load_lemmatizer(const std::string& path);

// 3 x 1 logits from the concatenated encoder final states (EncodeOut::dec0.h).
nn::Expr edit_logits(nn::Graph& g, const LemmatizerModel& m, nn::Expr enc_final);

enum class LemmaRoute {
  kPairDict = 0,   // (word, UPOS) dictionary hit
  kWordDict = 1,   // word dictionary hit
  kIdentity = 2,   // edit classifier: lemma == word
  kLowercase = 3,  // edit classifier: lemma == lowercase(word)
  kSeq2Seq = 4,    // beam-decoded
  kFallback = 5,   // no model, or the decoder produced nothing: word kept
};

// Dictionary pair lookup, then word lookup, then the edit classifier, which
// either shortcuts or defers to the seq2seq. Total: never returns empty.
std::string lemmatize(const std::string& word, const std::string& upos,
                      const LemmaLexicon& lex, const LemmatizerModel* model,
                      LemmaRoute* route = nullptr);

// Fills in word.lemma for every word, keying the pair map by word.upos.
void lemmatize_document(conllu::Document& doc, const LemmaLexicon& lex,
                        const LemmatizerModel* model);

// Joint training: per-example NLL of the seq2seq plus (equal weight) the
// cross-entropy of the edit classifier. The lexicon is built separately.
LemmatizerModel train_lemmatizer(const conllu::Document& train,
                                 const conllu::Document& dev,
                                 const Seq2SeqConfig& cfg,
                                 const Seq2SeqTrainConfig& tc);

struct EditRatios {
  double identity = 0.0;
  double lowercase = 0.0;
  double seq2seq = 0.0;
};

// Predicted edit-type ratios over every word occurrence in the document.
EditRatios edit_type_report(const LemmatizerModel& m, const conllu::Document& doc);

}  // namespace udkit
