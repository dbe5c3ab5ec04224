#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/nn/biaffine.hpp"
#include "udkit/nn/graph.hpp"
#include "udkit/nn/optim.hpp"
#include "udkit/nn/params.hpp"
#include "udkit/nn/rnn.hpp"
#include "udkit/tagger.hpp"
#include "udkit/vocab.hpp"

namespace udkit {

// Graph-based dependency parser. Every word is embedded from six sources
// (pretrained, frequent word, frequent lemma, char LSTM, summed UPOS+XPOS,
// summed UFeats), a learned ROOT column is prepended, and a 3-layer highway
// BiLSTM feeds four deep-biaffine heads: edge, linearization, distance,
// relation. Decoding runs Chu-Liu/Edmonds on linearization/distance-augmented
// edge scores with a single-root constraint.

struct ParserConfig {
  int word_emb_dim = 75;
  int lemma_emb_dim = 75;
  long freq_threshold = 7;  // min occurrences for word/lemma vocab
  int pre_proj_dim = 125;
  int char_emb_dim = 50;
  int char_hidden = 125;
  int char_proj_dim = 125;
  int tag_emb_dim = 50;   // UPOS and XPOS, summed
  int feat_emb_dim = 50;  // UFeat values, summed
  int layers = 3;
  int hidden = 400;
  int fc_dim = 400;
  double word_dropout = 0.33;
  double ff_dropout = 0.5;
  double rec_dropout = 0.25;
};

inline ParserConfig parser_defaults() { return ParserConfig{}; }

// Vocabularies the model is built over. pre_dim is the pretrained vector
// width; pre rows are filled (and frozen) by the caller or train_parser.
struct ParserVocabs {
  Vocab pre;
  Vocab word;   // lowercased frequent forms
  Vocab lemma;  // lowercased frequent lemmas
  Vocab chars;
  Vocab upos;
  Vocab xpos;
  Vocab feats;  // "Key=Value" items
  int pre_dim = 0;
};

struct ParserModel {
  ParserConfig cfg;
  std::vector<std::string> labels;  // sorted deprel set
  nn::ParamCollection pc;

  EmbeddingTable pre;  // frozen
  nn::Param* pre_proj_w = nullptr;
  nn::Param* pre_proj_b = nullptr;
  nn::Param* pre_drop = nullptr;  // word-dropout replacement, post projection

  EmbeddingTable word;
  EmbeddingTable lemma;

  nn::CharLstmParams chars;
  nn::Param* char_proj_w = nullptr;
  nn::Param* char_proj_b = nullptr;
  nn::Param* char_drop = nullptr;

  EmbeddingTable upos_emb;
  EmbeddingTable xpos_emb;
  EmbeddingTable feat_emb;

  nn::Param* root = nullptr;  // learned ROOT input column

  nn::HighwayBilstmParams rnn;

  nn::DeepBiaffineParams edge;  // out 1
  nn::DeepBiaffineParams lin;   // out 1
  nn::DeepBiaffineParams dist;  // out 1
  nn::DeepBiaffineParams rel;   // out |labels|

  int input_dim() const;
};

ParserModel make_parser(const ParserConfig& cfg, std::vector<std::string> labels,
                        const ParserVocabs& vocabs, nn::Rng& rng);

// BiLSTM states over [ROOT, w_1..w_n]: 2*hidden x (n+1), ROOT at column 0.
nn::Expr parser_states(nn::Graph& g, const ParserModel& m,
                       const std::vector<conllu::Word>& words,
                       const nn::DropoutSpec& drop = {});

// All score tensors are (n+1)x(n+1) with entry (i,j) = dependent i, head j.
// lin_signed(i,j) = sgn(i-j) * lin(i,j); dist_pred = 1 + softplus(dist_raw);
// delta(i,j) = |i-j| - dist_pred(i,j). rel_dep/rel_head are the relation
// head's FC states (fc_dim x (n+1)), scored lazily once heads are known.
struct ScoreTensors {
  nn::Expr edge;
  nn::Expr lin;
  nn::Expr lin_signed;
  nn::Expr dist_raw;
  nn::Expr dist_pred;
  nn::Expr delta;
  nn::Expr rel_dep;
  nn::Expr rel_head;
  int n = 0;
};

ScoreTensors score_from_states(nn::Graph& g, const ParserModel& m, nn::Expr h,
                               const nn::DropoutSpec& drop = {});
ScoreTensors score_sentence(nn::Graph& g, const ParserModel& m,
                            const std::vector<conllu::Word>& words,
                            const nn::DropoutSpec& drop = {});

// A(i,j) = edge + log sigma(lin_signed) - log(1 + delta^2/2). Values only;
// used for decoding, never for gradients.
nn::Mat augmented_edge_scores(const ScoreTensors& t);

// Maximum spanning arborescence rooted at node 0 with exactly one word
// attached to ROOT. scores(i,j) = weight of head j -> dependent i; diagonal
// ignored. Returns heads[0..n] with heads[0] = 0. Ties: lowest head index.
std::vector<int> decode_mst(const nn::Mat& scores);

// |labels| x n relation scores for words 1..n at the given heads.
nn::Expr relation_scores(nn::Graph& g, const ParserModel& m, const ScoreTensors& t,
                         const std::vector<int>& heads);
std::vector<std::string> assign_relations(nn::Graph& g, const ParserModel& m,
                                          const ScoreTensors& t,
                                          const std::vector<int>& heads);

// Sum over words of: head CE on raw edge scores, -log sigma(lin_signed) at
// the gold edge, log(1 + delta^2/2) at the gold edge, relation CE at the gold
// head. gold_heads/gold_rels are indexed like decode_mst output (entry 0
// ignored); -1 masks a word out of all terms (rels additionally skip -1).
nn::Expr parser_loss(nn::Graph& g, const ParserModel& m, const ScoreTensors& t,
                     const std::vector<int>& gold_heads,
                     const std::vector<int>& gold_rels);

// Fills head/deprel on every word; requires tags/lemmas already present.
void parse_document(conllu::Document& doc, const ParserModel& m);

struct ParserTrainConfig {
  nn::ScheduleConfig schedule;
  std::uint64_t seed = 1;
};

ParserTrainConfig parser_train_defaults();

struct ParserTrainStats {
  long missing_pretrained = 0;  // distinct train forms absent from vectors
  double dev_las = 0.0;
  std::vector<nn::ScheduleEvent> events;
};

ParserModel train_parser(const conllu::Document& train, const conllu::Document& dev,
                         const WordVectors& vectors, const ParserConfig& cfg,
                         const ParserTrainConfig& tc, ParserTrainStats* stats = nullptr);

void save_parser(const std::string& path, const ParserModel& m);
ParserModel load_parser(const std::string& path);

}  // namespace udkit
