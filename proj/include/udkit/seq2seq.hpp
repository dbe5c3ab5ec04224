#pragma once

#include <functional>
#include <string>
#include <vector>

#include "udkit/nn/optim.hpp"
#include "udkit/nn/rnn.hpp"
#include "udkit/vocab.hpp"

namespace udkit {

// Character-level encoder-decoder with MLP attention, shared by the MWT
// expander and the lemmatizer. The decoder starts from the concatenated
// final encoder states, so dec_hidden must equal 2*enc_hidden.
struct Seq2SeqConfig {
  int emb_dim = 64;
  int enc_hidden = 256;  // per direction
  int dec_hidden = 512;
  double dropout = 0.5;
  int beam_size = 8;
};

struct Seq2Seq {
  Seq2SeqConfig cfg;
  Vocab vocab;  // symbol table with <s>/</s>; embeddings shared enc/dec
  nn::Param* emb = nullptr;
  nn::BiLstmParams enc;
  nn::LstmParams dec;
  nn::Param* att_w = nullptr;  // dec_hidden x (dec_hidden + 2*enc_hidden)
  nn::Param* att_u = nullptr;  // 1 x dec_hidden
  nn::Param* out_w = nullptr;  // dec_hidden x (dec_hidden + 2*enc_hidden)
  nn::Param* out_u = nullptr;  // |V| x dec_hidden
};

// Parameters are created inside `pc` under `prefix` so owners can bundle
// them with their own heads in one model file.
Seq2Seq make_seq2seq(nn::ParamCollection& pc, const std::string& prefix,
                     const Seq2SeqConfig& cfg, Vocab vocab, nn::Rng& rng);

struct EncodeOut {
  nn::Expr states;  // 2*enc_hidden x n
  nn::LstmState dec0;
};

EncodeOut encode(nn::Graph& g, const Seq2Seq& m, const std::vector<int>& ids,
                 const nn::DropoutSpec& drop = {});

struct DecodeOut {
  nn::Expr logits;  // |V| x 1
  nn::Expr alpha;   // n x 1 attention over encoder positions
  nn::LstmState state;
};

// One decoder step conditioned on the previous output symbol.
DecodeOut decode_step(nn::Graph& g, const Seq2Seq& m, int prev,
                      const nn::LstmState& state, nn::Expr enc_states,
                      const nn::DropoutSpec& drop = {});

// Teacher-forced negative log-likelihood of `output` (without bounds
// symbols) given `input`; the end symbol is scored as the final target.
nn::Expr seq2seq_nll(nn::Graph& g, const Seq2Seq& m,
                     const std::vector<int>& input,
                     const std::vector<int>& output,
                     const nn::DropoutSpec& drop = {});

struct BeamResult {
  std::vector<int> ids;          // output symbols, bounds excluded
  std::vector<int> attn_argmax;  // per emitted symbol, best input position
  double logprob = 0.0;
  bool terminated = false;
};

// Highest-total-log-probability decode; ties broken by shorter length,
// then lexicographic symbol order. max_len < 0 uses 2*input+10. If nothing
// terminates within max_len the best unterminated hypothesis is returned
// with terminated = false. No length normalization.
BeamResult beam_decode(const Seq2Seq& m, const std::vector<int>& input,
                       int beam = 0, int max_len = -1);

// UTF-8 convenience wrapper: encodes codepoints through the vocabulary,
// decodes, and resolves UNK outputs by copying the input character at the
// attention argmax.
std::string decode_string(const Seq2Seq& m, const std::string& input);

std::vector<int> symbol_ids(const Vocab& v, const std::string& utf8_text);

struct Seq2SeqTrainConfig {
  int max_epochs = 100;
  int anneal_after = 15;       // epoch after which deterioration anneals lr
  double anneal_factor = 0.9;
  nn::AdamConfig adam;         // standard Adam defaults
  uint64_t seed = 1;
};

struct Seq2SeqExample {
  std::vector<int> input;
  std::vector<int> output;
};

struct EpochEvent {
  int epoch;
  double metric;  // -mean dev NLL per example
  double lr;
};

struct Seq2SeqTrainResult {
  double best_metric = 0.0;
  int best_epoch = 0;
  std::vector<EpochEvent> log;
};

// Joint extra loss per training example (the lemmatizer's edit classifier);
// added to the NLL with equal weight.
using ExtraLossFn = std::function<nn::Expr(nn::Graph&, size_t example,
                                           const EncodeOut&)>;

// Trains all parameters in `pc` (which may hold more than the seq2seq).
Seq2SeqTrainResult train_seq2seq(nn::ParamCollection& pc, const Seq2Seq& m,
                                 const std::vector<Seq2SeqExample>& train,
                                 const std::vector<Seq2SeqExample>& dev,
                                 const Seq2SeqTrainConfig& cfg,
                                 const ExtraLossFn& extra = nullptr);

}  // namespace udkit
