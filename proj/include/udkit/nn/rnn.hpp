#pragma once

#include <string>
#include <vector>

#include "udkit/nn/graph.hpp"
#include "udkit/vocab.hpp"

namespace udkit::nn {

// Dropout regime for recurrent stacks. The recurrent mask is variational:
// one mask per sequence, shared across time steps. Input masks are fresh per
// layer. Rates of zero (or train=false) disable everything.
struct DropoutSpec {
  double input = 0.0;
  double recurrent = 0.0;
  bool train = false;
  Rng* rng = nullptr;
};

// Gate order in the stacked weights: input, forget, cell, output.
struct LstmParams {
  Param* w = nullptr;  // 4H x X
  Param* u = nullptr;  // 4H x H
  Param* b = nullptr;  // 4H x 1
  int input_dim = 0;
  int hidden = 0;
};

LstmParams make_lstm(ParamCollection& pc, const std::string& prefix,
                     int input_dim, int hidden, Rng& rng);

struct LstmState {
  Expr h;
  Expr c;
};

LstmState lstm_initial(Graph& g, const LstmParams& p);

// One step. rec_mask, when non-null, is a variational dropout mask applied
// to the previous hidden state (H x 1).
LstmState lstm_step(Graph& g, const LstmParams& p, Expr x_t, LstmState prev,
                    const Mat* rec_mask = nullptr);

// Runs over the columns of x (X x n) and returns all hidden states (H x n),
// aligned to input positions in both directions.
Expr lstm_run(Graph& g, const LstmParams& p, Expr x, bool reverse,
              const DropoutSpec& drop);

struct BiLstmParams {
  LstmParams fwd, bwd;
  int hidden = 0;
};

BiLstmParams make_bilstm(ParamCollection& pc, const std::string& prefix,
                         int input_dim, int hidden, Rng& rng);

Expr bilstm_run(Graph& g, const BiLstmParams& p, Expr x, const DropoutSpec& drop);

// Stack of BiLSTMs with a highway connection per layer: the layer output is
// gated elementwise against a linear projection of the layer input.
struct HighwayBilstmParams {
  std::vector<BiLstmParams> layers;
  std::vector<Param*> gate_w;  // 2H x X_l
  std::vector<Param*> gate_b;  // 2H x 1
  std::vector<Param*> proj_w;  // 2H x X_l
  int hidden = 0;
};

HighwayBilstmParams make_highway_bilstm(ParamCollection& pc, const std::string& prefix,
                                        int input_dim, int layers, int hidden,
                                        Rng& rng);

// Output is 2*hidden x n. Throws on an empty sequence.
Expr highway_bilstm(Graph& g, const HighwayBilstmParams& p, Expr x,
                    const DropoutSpec& drop);

// Unidirectional LSTM over the characters of a UTF-8 word; returns the final
// hidden state (H x 1). Unknown characters embed as <unk>; an empty word is
// treated as a single <unk> character.
struct CharLstmParams {
  EmbeddingTable emb;
  LstmParams lstm;
};

CharLstmParams make_char_lstm(ParamCollection& pc, const std::string& prefix,
                              Vocab chars, int emb_dim, int hidden, Rng& rng);

Expr char_lstm_embed(Graph& g, const CharLstmParams& p, const std::string& word,
                     const DropoutSpec& drop);

}  // namespace udkit::nn
