#pragma once

#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/nn/optim.hpp"
#include "udkit/nn/rnn.hpp"

namespace udkit {

// Tokenization unit: one character, or one syllable (maximal alphanumeric
// run or single symbol, with any leading whitespace attached).
struct Unit {
  std::string text;
  bool starts_space = false;
  bool starts_cap = false;
  bool fully_cap = false;
  bool numeric = false;
};

using UnitSeq = std::vector<Unit>;

enum class UnitTag { kOther = 0, kEot = 1, kEos = 2, kMwt = 3, kMws = 4 };

// Splits raw text into paragraphs (blank-line separated), normalizes
// in-paragraph whitespace runs to single spaces, and unitizes each
// paragraph. Tagging state never crosses a paragraph boundary.
std::vector<UnitSeq> unitize(const std::string& raw, bool syllable_mode);

struct TokenizerConfig {
  bool syllable_mode = false;
  int emb_dim = 32;
  int hidden = 64;  // per direction
  int conv_channels = 64;
  std::vector<int> conv_widths = {1, 9};
  double gate_temperature = 2.0;
  double gate_noise_p = 0.02;
  double dropout = 0.33;
  double unk_replace_p = 0.33;
  // Ablation switches.
  bool use_gating = true;
  bool use_conv = true;
  bool use_dropout = true;
};

struct TokenizerModel {
  TokenizerConfig cfg;
  nn::ParamCollection pc;
  Vocab units;
  nn::Param* emb = nullptr;
  nn::BiLstmParams rnn1, rnn2;
  std::vector<nn::Param*> conv_w;
  nn::Param* conv_proj_w = nullptr;
  nn::Param* conv_proj_b = nullptr;
  nn::Param* w1 = nullptr;  // 3 x 2H linear heads, rows tok/sent/mwt
  nn::Param* w2 = nullptr;
};

TokenizerModel make_tokenizer(TokenizerConfig cfg, Vocab units, uint64_t seed);

void save_tokenizer(const TokenizerModel& m, const std::string& path);
TokenizerModel load_tokenizer(const std::string& path);

// Layer-local and summed boundary scores (3 x n: tok, sent, mwt rows).
struct TokenizerScores {
  nn::Expr layer1;
  nn::Expr layer2;
  nn::Expr summed;
  nn::Expr gate;  // 1 x n multiplicative gate actually applied
};

TokenizerScores score_units(nn::Graph& g, const TokenizerModel& m,
                            const UnitSeq& units, bool training = false,
                            nn::Rng* rng = nullptr);

// Factorized 5-way distribution from summed scores; rows ordered
// EOT, EOS, MWT, MWS, OTHER. Columns sum to one.
nn::Mat tag_distribution(const nn::Mat& summed_scores);

std::vector<UnitTag> argmax_tags(const nn::Mat& summed_scores);

// Builds sentences of surface tokens from per-unit tags. Tokens tagged
// MWT/MWS carry the pending-expansion flag. Unterminated trailing material
// is flushed as a final token and sentence.
std::vector<conllu::Sentence> decode_segments(const std::vector<UnitTag>& tags,
                                              const UnitSeq& units);

// Full tokenization of raw text into a CoNLL-U skeleton.
conllu::Document tokenize_text(const TokenizerModel& m, const std::string& raw);

// Gold tags by aligning gold surface tokens against the unit stream.
// Throws DataError naming the sentence when the two disagree.
std::vector<std::vector<UnitTag>> gold_unit_tags(
    const std::vector<UnitSeq>& paragraphs, const conllu::Document& gold);

struct TokenizerTrainConfig {
  int max_steps = 20000;
  double lr = 0.002;
  int eval_interval = 200;
  int eval_start = 2000;
  double lr_decay_on_drop = 0.999;
  uint64_t seed = 1;
};

TokenizerModel train_tokenizer(const std::string& raw_train,
                               const conllu::Document& gold_train,
                               const std::string& raw_dev,
                               const conllu::Document& gold_dev,
                               const TokenizerConfig& cfg,
                               const TokenizerTrainConfig& train);

}  // namespace udkit
