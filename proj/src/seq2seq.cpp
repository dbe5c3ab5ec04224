#include "udkit/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "udkit/error.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

using nn::Expr;
using nn::Graph;
using nn::LstmState;
using nn::Mat;
using namespace nn;  // graph ops

Seq2Seq make_seq2seq(nn::ParamCollection& pc, const std::string& prefix,
                     const Seq2SeqConfig& cfg, Vocab vocab, nn::Rng& rng) {
  if (cfg.dec_hidden != 2 * cfg.enc_hidden)
    throw std::invalid_argument(
        "seq2seq: dec_hidden must be 2*enc_hidden (decoder starts from the "
        "concatenated final encoder states)");
  if (vocab.bos() < 0 || vocab.eos() < 0)
    throw std::invalid_argument("seq2seq vocab needs bounds symbols");
  Seq2Seq m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  m.emb = &pc.add(prefix + ".emb", m.vocab.size(), cfg.emb_dim);
  init_normal(m.emb->value, 1.0 / std::sqrt(double(cfg.emb_dim)), rng);
  m.emb->value.row(Vocab::kPad).setZero();
  m.enc = make_bilstm(pc, prefix + ".enc", cfg.emb_dim, cfg.enc_hidden, rng);
  m.dec = make_lstm(pc, prefix + ".dec", cfg.emb_dim, cfg.dec_hidden, rng);
  int pair = cfg.dec_hidden + 2 * cfg.enc_hidden;
  m.att_w = &pc.add(prefix + ".att.w", cfg.dec_hidden, pair);
  m.att_u = &pc.add(prefix + ".att.u", 1, cfg.dec_hidden);
  m.out_w = &pc.add(prefix + ".out.w", cfg.dec_hidden, pair);
  m.out_u = &pc.add(prefix + ".out.u", m.vocab.size(), cfg.dec_hidden);
  for (nn::Param* p : {m.att_w, m.att_u, m.out_w, m.out_u})
    init_uniform_fan_in(p->value, rng);
  return m;
}

EncodeOut encode(Graph& g, const Seq2Seq& m, const std::vector<int>& ids,
                 const nn::DropoutSpec& drop) {
  if (ids.empty()) throw std::invalid_argument("seq2seq encode: empty input");
  int n = static_cast<int>(ids.size());
  Expr x = g.lookup(*m.emb, ids);
  Expr states = bilstm_run(g, m.enc, x, drop);
  int h = m.cfg.enc_hidden;
  // Final forward state lives at the last position, final backward at the first.
  Expr h0 = concat_rows({col(rows(states, 0, h), n - 1), col(rows(states, h, h), 0)});
  LstmState dec0;
  dec0.h = h0;
  dec0.c = g.constant(Mat::Zero(m.cfg.dec_hidden, 1));
  return {states, dec0};
}

namespace {

// alpha_i ∝ exp(u^T tanh(W [h_dec; h_enc_i])); returns (context, alpha).
std::pair<Expr, Expr> attend(Graph& g, const Seq2Seq& m, Expr h_dec,
                             Expr enc_states) {
  int d = m.cfg.dec_hidden;
  Expr w_dec = colrange(g.param(*m.att_w), 0, d);
  Expr w_enc = colrange(g.param(*m.att_w), d, 2 * m.cfg.enc_hidden);
  Expr scores = matmul(g.param(*m.att_u),
                       tanh_(add_colvec(matmul(w_enc, enc_states),
                                        matmul(w_dec, h_dec))));  // 1 x n
  Expr alpha = softmax_cols(transpose(scores));                   // n x 1
  Expr ctx = matmul(enc_states, alpha);                           // 2H x 1
  return {ctx, alpha};
}

Expr output_logits(Graph& g, const Seq2Seq& m, Expr h_dec, Expr ctx) {
  int d = m.cfg.dec_hidden;
  Expr w_d = colrange(g.param(*m.out_w), 0, d);
  Expr w_c = colrange(g.param(*m.out_w), d, 2 * m.cfg.enc_hidden);
  return matmul(g.param(*m.out_u),
                tanh_(add(matmul(w_d, h_dec), matmul(w_c, ctx))));
}

Expr maybe_drop(Graph& g, Expr x, const nn::DropoutSpec& drop, double p) {
  if (!drop.train || p <= 0.0 || !drop.rng) return x;
  return cmul(x, g.constant(nn::dropout_mask(x.rows(), x.cols(), p, *drop.rng)));
}

}  // namespace

DecodeOut decode_step(Graph& g, const Seq2Seq& m, int prev,
                      const LstmState& state, Expr enc_states,
                      const nn::DropoutSpec& drop) {
  Expr x = maybe_drop(g, g.lookup(*m.emb, {prev}), drop, drop.input);
  LstmState next = lstm_step(g, m.dec, x, state);
  Expr h = maybe_drop(g, next.h, drop, drop.input);
  auto [ctx, alpha] = attend(g, m, h, enc_states);
  return {output_logits(g, m, h, ctx), alpha, next};
}

Expr seq2seq_nll(Graph& g, const Seq2Seq& m, const std::vector<int>& input,
                 const std::vector<int>& output, const nn::DropoutSpec& drop) {
  EncodeOut enc = encode(g, m, input, drop);
  std::vector<int> dec_in = {m.vocab.bos()};
  dec_in.insert(dec_in.end(), output.begin(), output.end());
  std::vector<int> targets = output;
  targets.push_back(m.vocab.eos());

  // Variational recurrent mask for the decoder (one per sequence).
  Mat rec_mask;
  const Mat* rm = nullptr;
  if (drop.train && drop.recurrent > 0.0 && drop.rng) {
    rec_mask = nn::dropout_mask(m.cfg.dec_hidden, 1, drop.recurrent, *drop.rng);
    rm = &rec_mask;
  }

  LstmState s = enc.dec0;
  std::vector<Expr> logit_cols;
  for (int id : dec_in) {
    Expr x = maybe_drop(g, g.lookup(*m.emb, {id}), drop, drop.input);
    s = lstm_step(g, m.dec, x, s, rm);
    Expr h = maybe_drop(g, s.h, drop, drop.input);
    auto [ctx, alpha] = attend(g, m, h, enc.states);
    (void)alpha;
    logit_cols.push_back(output_logits(g, m, h, ctx));
  }
  return nll_cols(concat_cols(logit_cols), targets);
}

namespace {

struct Hyp {
  std::vector<int> ids;
  std::vector<int> attn;
  double lp = 0.0;
  Mat h, c;
};

// Orders completed hypotheses: best logprob, then shortest, then
// lexicographically smallest symbol sequence.
bool better(const Hyp& a, const Hyp& b) {
  if (a.lp != b.lp) return a.lp > b.lp;
  if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
  return a.ids < b.ids;
}

}  // namespace

BeamResult beam_decode(const Seq2Seq& m, const std::vector<int>& input,
                       int beam, int max_len) {
  if (beam <= 0) beam = m.cfg.beam_size;
  if (max_len < 0) max_len = 2 * static_cast<int>(input.size()) + 10;

  Mat enc_states;
  Hyp root;
  {
    // Materialize encoder values once; beam steps re-enter them as constants.
    Graph g;
    EncodeOut enc = encode(g, m, input);
    enc_states = enc.states.val();
    root.h = enc.dec0.h.val();
    root.c = Mat::Zero(m.cfg.dec_hidden, 1);
  }

  int nsym = m.vocab.size();
  std::vector<Hyp> live = {root};
  std::vector<Hyp> done;
  int eos = m.vocab.eos(), bos = m.vocab.bos();

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    // Expansion is exhaustive over symbols; pruning keeps the global top.
    struct Cand {
      double lp;
      size_t hyp;
      int sym;
      int attn;
    };
    std::vector<Cand> cands;
    for (size_t hi = 0; hi < live.size(); ++hi) {
      Hyp& hy = live[hi];
      int prev = hy.ids.empty() ? bos : hy.ids.back();
      Graph g;
      LstmState s{g.constant(hy.h), g.constant(hy.c)};
      DecodeOut out = decode_step(g, m, prev, s, g.constant(enc_states));
      hy.h = out.state.h.val();
      hy.c = out.state.c.val();
      Mat logits = out.logits.val();
      double mx = logits.maxCoeff();
      double lse = mx + std::log((logits.array() - mx).exp().sum());
      Eigen::Index best_pos;
      out.alpha.val().col(0).maxCoeff(&best_pos);
      for (int w = 0; w < nsym; ++w) {
        if (w == bos || w == Vocab::kPad || w == Vocab::kDrop) continue;
        cands.push_back({hy.lp + logits(w, 0) - lse, hi, w,
                         static_cast<int>(best_pos)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.lp != b.lp) return a.lp > b.lp;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.sym < b.sym;
    });
    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      if (static_cast<int>(next.size()) >= beam) break;
      Hyp hy = live[c.hyp];
      if (c.sym == eos) {
        hy.lp = c.lp;
        done.push_back(std::move(hy));
        continue;  // completed hypotheses do not occupy beam slots
      }
      hy.ids.push_back(c.sym);
      hy.attn.push_back(c.attn);
      hy.lp = c.lp;
      next.push_back(std::move(hy));
    }
    live = std::move(next);
    // Scores only fall as length grows, so a completed hypothesis at least
    // as good as every live one is final.
    if (!done.empty() && !live.empty()) {
      double best_done = std::max_element(done.begin(), done.end(), [](const Hyp& a, const Hyp& b) {
                           return a.lp < b.lp;
                         })->lp;
      double best_live = std::max_element(live.begin(), live.end(), [](const Hyp& a, const Hyp& b) {
                           return a.lp < b.lp;
                         })->lp;
      if (best_done >= best_live) break;
    }
  }

  BeamResult r;
  const Hyp* pick = nullptr;
  for (const Hyp& h : done)
    if (!pick || better(h, *pick)) pick = &h;
  if (pick) {
    r.terminated = true;
  } else {
    for (const Hyp& h : live)
      if (!pick || better(h, *pick)) pick = &h;
    r.terminated = false;
  }
  if (!pick) throw std::logic_error("beam_decode: no hypotheses");
  r.ids = pick->ids;
  r.attn_argmax = pick->attn;
  r.logprob = pick->lp;
  return r;
}

std::vector<int> symbol_ids(const Vocab& v, const std::string& utf8_text) {
  std::vector<int> ids;
  for (char32_t c : utf8::decode(utf8_text)) ids.push_back(v.get(utf8::encode_one(c)));
  return ids;
}

std::string decode_string(const Seq2Seq& m, const std::string& input) {
  std::vector<char32_t> in_cps = utf8::decode(input);
  std::vector<int> ids;
  ids.reserve(in_cps.size());
  for (char32_t c : in_cps) ids.push_back(m.vocab.get(utf8::encode_one(c)));
  if (ids.empty()) return std::string();
  BeamResult r = beam_decode(m, ids);
  std::string out;
  for (size_t j = 0; j < r.ids.size(); ++j) {
    if (r.ids[j] == Vocab::kUnk) {
      // Copy the input character the decoder attended to.
      out += utf8::encode_one(in_cps[static_cast<size_t>(r.attn_argmax[j])]);
    } else {
      out += m.vocab.name(r.ids[j]);
    }
  }
  return out;
}

Seq2SeqTrainResult train_seq2seq(nn::ParamCollection& pc, const Seq2Seq& m,
                                 const std::vector<Seq2SeqExample>& train,
                                 const std::vector<Seq2SeqExample>& dev,
                                 const Seq2SeqTrainConfig& cfg,
                                 const ExtraLossFn& extra) {
  if (train.empty()) throw DataError("seq2seq training data is empty");
  nn::Adam opt(cfg.adam);
  nn::Rng rng(cfg.seed);
  nn::DropoutSpec drop;
  drop.input = m.cfg.dropout;
  drop.recurrent = m.cfg.dropout;
  drop.train = true;
  drop.rng = &rng;

  auto dev_metric = [&]() {
    if (dev.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : dev) {
      Graph g;
      total += seq2seq_nll(g, m, ex.input, ex.output).val()(0, 0);
    }
    return -total / static_cast<double>(dev.size());
  };

  Seq2SeqTrainResult res;
  std::vector<Mat> best;
  double prev_metric = 0.0;
  bool have_prev = false;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t idx : order) {
      const auto& ex = train[idx];
      pc.zero_grad();
      Graph g;
      Expr loss;
      if (extra) {
        // Joint training shares one encode pass between both losses.
        EncodeOut enc = encode(g, m, ex.input, drop);
        std::vector<int> dec_in = {m.vocab.bos()};
        dec_in.insert(dec_in.end(), ex.output.begin(), ex.output.end());
        std::vector<int> targets = ex.output;
        targets.push_back(m.vocab.eos());
        Mat rec_mask = nn::dropout_mask(m.cfg.dec_hidden, 1, drop.recurrent, rng);
        LstmState s = enc.dec0;
        std::vector<Expr> logit_cols;
        for (int id : dec_in) {
          Expr x = maybe_drop(g, g.lookup(*m.emb, {id}), drop, drop.input);
          s = lstm_step(g, m.dec, x, s, &rec_mask);
          Expr h = maybe_drop(g, s.h, drop, drop.input);
          auto [ctx, alpha] = attend(g, m, h, enc.states);
          (void)alpha;
          logit_cols.push_back(output_logits(g, m, h, ctx));
        }
        loss = add(nll_cols(concat_cols(logit_cols), targets),
                   extra(g, idx, enc));
      } else {
        loss = seq2seq_nll(g, m, ex.input, ex.output, drop);
      }
      g.backward(loss);
      opt.step(pc);
    }

    double metric = dev_metric();
    if (have_prev && metric < prev_metric && epoch > cfg.anneal_after)
      opt.set_lr(opt.lr() * cfg.anneal_factor);
    prev_metric = metric;
    have_prev = true;
    res.log.push_back({epoch, metric, opt.lr()});
    if (best.empty() || metric > res.best_metric) {
      res.best_metric = metric;
      res.best_epoch = epoch;
      best = pc.snapshot_values();
    }
  }
  if (!best.empty()) pc.restore_values(best);
  return res;
}

}  // namespace udkit
