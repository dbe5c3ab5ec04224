#pragma once

#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/nn/biaffine.hpp"
#include "udkit/nn/optim.hpp"
#include "udkit/nn/rnn.hpp"
#include "udkit/vocab.hpp"

namespace udkit {

// How XPOS is classified. Exactly one of these is instantiated per model.
enum class XposStrategy {
  kBiaffine = 0,  // one tag-level classifier conditioned on UPOS
  kPerChar = 1,   // fixed-length tagsets: one conditioned classifier per position
  kSharedFc = 2,  // huge or absent tagsets: plain affine over a shared FC layer
};

// Fixed length (in codepoints) wins over the size cutoff; an unused tagset
// (empty) always degrades to the shared-FC head.
XposStrategy select_xpos_strategy(const std::vector<std::string>& xpos,
                                  size_t limit = 250, bool force_shared_fc = false);

// Tag inventories harvested from a training document. All lists are sorted
// byte-wise; "_" never appears as a tag. feat_values[k][0] is always "", the
// explicit absent value, so every word scores every feature key.
struct TagSpaces {
  std::vector<std::string> upos;
  std::vector<std::string> xpos;
  XposStrategy strategy = XposStrategy::kSharedFc;
  std::vector<std::vector<std::string>> xpos_chars;  // per position, kPerChar only
  std::vector<std::string> feat_keys;
  std::vector<std::vector<std::string>> feat_values;

  int upos_id(const std::string& tag) const;
  int xpos_id(const std::string& tag) const;
  int xpos_char_id(size_t pos, const std::string& cp) const;
  int feat_value_id(size_t key, const std::string& value) const;
};

TagSpaces build_tag_spaces(const conllu::Document& train, size_t xpos_limit = 250,
                           bool force_shared_fc = false);

// word2vec text format: header "count dim", then one "word v1 .. vd" per line.
struct WordVectors {
  std::vector<std::string> words;
  nn::Mat matrix;  // one row per word, in file order
  int dim = 0;
};

WordVectors load_word2vec(const std::string& path);

struct TaggerConfig {
  int word_emb_dim = 75;    // trainable frequent-word embeddings
  long freq_threshold = 7;  // min training occurrences for a frequent word
  int pre_proj_dim = 125;   // projection of the frozen pretrained vectors
  int char_emb_dim = 50;
  int char_hidden = 125;
  int char_proj_dim = 125;
  int layers = 2;
  int hidden = 200;  // per direction
  int fc_dim = 400;
  int feat_fc_dim = 100;  // also the per-character XPOS FC width
  int upos_emb_dim = 50;
  double word_dropout = 0.33;
  double ff_dropout = 0.5;
  double rec_dropout = 0.5;
  size_t xpos_limit = 250;
  bool force_shared_fc = false;
};

inline TaggerConfig tagger_defaults() { return {}; }

// FC + ReLU into a stack of bilinear forms conditioned on the UPOS embedding:
// scores(k) = [e_upos;1]^T U_k [v;1].
struct CondHead {
  nn::Param* fc_w = nullptr;  // fc_dim x 2*hidden
  nn::Param* fc_b = nullptr;
  nn::Param* u = nullptr;  // out*(upos_emb_dim+1) x (fc_dim+1)
  int fc_dim = 0;
  int out = 0;
};

struct AffineHead {
  nn::Param* w = nullptr;
  nn::Param* b = nullptr;
};

struct TaggerModel {
  TaggerConfig cfg;
  TagSpaces spaces;
  nn::ParamCollection pc;

  EmbeddingTable pre;  // frozen; unknown words sit on the zero <unk> row
  nn::Param* pre_proj_w = nullptr;
  nn::Param* pre_proj_b = nullptr;
  nn::Param* pre_drop = nullptr;  // learned replacement under word dropout
  EmbeddingTable freq;            // uncased; <drop> row doubles as its replacement
  nn::CharLstmParams chars;
  nn::Param* char_proj_w = nullptr;
  nn::Param* char_proj_b = nullptr;
  nn::Param* char_drop = nullptr;
  nn::HighwayBilstmParams rnn;

  nn::Param* fc_w = nullptr;  // UPOS FC; the shared FC under kSharedFc
  nn::Param* fc_b = nullptr;
  AffineHead upos_out;
  nn::Param* upos_emb = nullptr;  // |upos| x upos_emb_dim conditioning table

  CondHead xpos_head;                     // kBiaffine
  std::vector<CondHead> xpos_char_heads;  // kPerChar
  AffineHead xpos_out;                    // kSharedFc with a non-empty tagset
  std::vector<CondHead> feat_heads;       // kBiaffine / kPerChar
  std::vector<AffineHead> feat_outs;      // kSharedFc
};

TaggerModel make_tagger(const TaggerConfig& cfg, const TagSpaces& spaces,
                        const Vocab& pre_vocab, int pre_dim, const Vocab& freq_vocab,
                        const Vocab& char_vocab, nn::Rng& rng);

// Shared trunk of the loss and the inference path.
struct TaggerStates {
  nn::Expr h;     // 2*hidden x n BiLSTM states
  nn::Expr v;     // fc_dim x n ReLU FC output read by the plain affine heads
  nn::Expr upos;  // |upos| x n logits
};

TaggerStates tagger_states(nn::Graph& g, const TaggerModel& m,
                           const std::vector<std::string>& forms,
                           const nn::DropoutSpec& drop = {});

// out x n logits with column i conditioned on the UPOS embedding cond[i].
nn::Expr cond_scores(nn::Graph& g, const TaggerModel& m, const CondHead& head,
                     nn::Expr h, const std::vector<int>& cond,
                     const nn::DropoutSpec& drop = {});

struct SentenceTags {
  std::vector<std::string> upos;
  std::vector<std::string> xpos;   // "_" when the tagset is unused
  std::vector<std::string> feats;  // canonical K=V|... or "_"
};

// gold_upos, when given, supplies the conditioning tags; words whose gold tag
// is missing from the tagset fall back to the predicted one.
SentenceTags tag_sentence(const TaggerModel& m, const std::vector<std::string>& forms,
                          const std::vector<std::string>* gold_upos = nullptr);

void tag_document(conllu::Document& doc, const TaggerModel& m);

struct TaggerTrainConfig {
  nn::ScheduleConfig schedule;
  uint64_t seed = 1;
};

TaggerTrainConfig tagger_train_defaults();

struct TaggerTrainStats {
  long missing_pretrained = 0;  // distinct training forms absent from the vectors
  double dev_metric = 0.0;      // best AllTags word accuracy on dev
  std::vector<nn::ScheduleEvent> events;
};

TaggerModel train_tagger(const conllu::Document& train, const conllu::Document& dev,
                         const WordVectors& vectors, const TaggerConfig& cfg,
                         const TaggerTrainConfig& tc,
                         TaggerTrainStats* stats = nullptr);

void save_tagger(const std::string& path, const TaggerModel& m);
TaggerModel load_tagger(const std::string& path);

}  // namespace udkit
