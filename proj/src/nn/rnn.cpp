#include "udkit/nn/rnn.hpp"

#include <stdexcept>

#include "udkit/utf8.hpp"

namespace udkit::nn {

namespace {

bool drops_on(const DropoutSpec& d) { return d.train && d.rng != nullptr; }

// Applies an optional fresh dropout mask to a whole sequence.
Expr maybe_input_dropout(Graph& g, Expr x, const DropoutSpec& d) {
  if (!drops_on(d) || d.input <= 0.0) return x;
  return cmul(x, g.constant(dropout_mask(x.rows(), x.cols(), d.input, *d.rng)));
}

}  // namespace

LstmParams make_lstm(ParamCollection& pc, const std::string& prefix,
                     int input_dim, int hidden, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  p.w = &pc.add(prefix + ".w", 4 * hidden, input_dim);
  p.u = &pc.add(prefix + ".u", 4 * hidden, hidden);
  p.b = &pc.add(prefix + ".b", 4 * hidden, 1);
  init_uniform_fan_in(p.w->value, rng);
  init_orthogonal(p.u->value, rng);
  return p;
}

LstmState lstm_initial(Graph& g, const LstmParams& p) {
  return {g.constant(Mat::Zero(p.hidden, 1)), g.constant(Mat::Zero(p.hidden, 1))};
}

LstmState lstm_step(Graph& g, const LstmParams& p, Expr x_t, LstmState prev,
                    const Mat* rec_mask) {
  Expr h_prev = prev.h;
  if (rec_mask) h_prev = cmul(h_prev, g.constant(*rec_mask));
  Expr z = add(add_colvec(matmul(g.param(*p.w), x_t), g.param(*p.b)),
               matmul(g.param(*p.u), h_prev));
  int H = p.hidden;
  Expr i = sigmoid(rows(z, 0, H));
  Expr f = sigmoid(rows(z, H, H));
  Expr c_in = tanh_(rows(z, 2 * H, H));
  Expr o = sigmoid(rows(z, 3 * H, H));
  Expr c = add(cmul(f, prev.c), cmul(i, c_in));
  Expr h = cmul(o, tanh_(c));
  return {h, c};
}

Expr lstm_run(Graph& g, const LstmParams& p, Expr x, bool reverse,
              const DropoutSpec& drop) {
  int n = x.cols();
  if (n == 0) throw std::invalid_argument("lstm_run: empty sequence");
  Mat rec_mask;
  const Mat* maskp = nullptr;
  if (drops_on(drop) && drop.recurrent > 0.0) {
    rec_mask = dropout_mask(p.hidden, 1, drop.recurrent, *drop.rng);
    maskp = &rec_mask;
  }
  LstmState state = lstm_initial(g, p);
  std::vector<Expr> hs(static_cast<size_t>(n), Expr{});
  for (int k = 0; k < n; ++k) {
    int t = reverse ? n - 1 - k : k;
    state = lstm_step(g, p, col(x, t), state, maskp);
    hs[static_cast<size_t>(t)] = state.h;
  }
  return concat_cols(hs);
}

BiLstmParams make_bilstm(ParamCollection& pc, const std::string& prefix,
                         int input_dim, int hidden, Rng& rng) {
  BiLstmParams p;
  p.hidden = hidden;
  p.fwd = make_lstm(pc, prefix + ".fwd", input_dim, hidden, rng);
  p.bwd = make_lstm(pc, prefix + ".bwd", input_dim, hidden, rng);
  return p;
}

Expr bilstm_run(Graph& g, const BiLstmParams& p, Expr x, const DropoutSpec& drop) {
  Expr xin = maybe_input_dropout(g, x, drop);
  return concat_rows({lstm_run(g, p.fwd, xin, false, drop),
                      lstm_run(g, p.bwd, xin, true, drop)});
}

HighwayBilstmParams make_highway_bilstm(ParamCollection& pc, const std::string& prefix,
                                        int input_dim, int layers, int hidden,
                                        Rng& rng) {
  if (layers < 1) throw std::invalid_argument("highway bilstm needs >= 1 layer");
  HighwayBilstmParams p;
  p.hidden = hidden;
  for (int l = 0; l < layers; ++l) {
    int in_dim = l == 0 ? input_dim : 2 * hidden;
    std::string base = prefix + ".layer" + std::to_string(l);
    p.layers.push_back(make_bilstm(pc, base, in_dim, hidden, rng));
    Param& gw = pc.add(base + ".gate.w", 2 * hidden, in_dim);
    Param& gb = pc.add(base + ".gate.b", 2 * hidden, 1);
    Param& pw = pc.add(base + ".proj.w", 2 * hidden, in_dim);
    init_uniform_fan_in(gw.value, rng);
    init_uniform_fan_in(pw.value, rng);
    p.gate_w.push_back(&gw);
    p.gate_b.push_back(&gb);
    p.proj_w.push_back(&pw);
  }
  return p;
}

Expr highway_bilstm(Graph& g, const HighwayBilstmParams& p, Expr x,
                    const DropoutSpec& drop) {
  if (x.cols() == 0) throw std::invalid_argument("highway_bilstm: empty sequence");
  Expr cur = x;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    Expr h = bilstm_run(g, p.layers[l], cur, drop);
    Expr r = sigmoid(affine(g.param(*p.gate_w[l]), cur, g.param(*p.gate_b[l])));
    Expr proj = matmul(g.param(*p.proj_w[l]), cur);
    Mat ones = Mat::Ones(2 * p.hidden, cur.cols());
    cur = add(cmul(r, h), cmul(sub(g.constant(ones), r), proj));
  }
  return cur;
}

CharLstmParams make_char_lstm(ParamCollection& pc, const std::string& prefix,
                              Vocab chars, int emb_dim, int hidden, Rng& rng) {
  CharLstmParams p;
  p.emb = make_embedding(pc, prefix + ".emb", std::move(chars), emb_dim, rng);
  p.lstm = make_lstm(pc, prefix + ".lstm", emb_dim, hidden, rng);
  return p;
}

Expr char_lstm_embed(Graph& g, const CharLstmParams& p, const std::string& word,
                     const DropoutSpec& drop) {
  std::vector<int> ids;
  for (char32_t cp : utf8::decode(word))
    ids.push_back(p.emb.vocab.get(utf8::encode_one(cp)));
  if (ids.empty()) ids.push_back(Vocab::kUnk);
  Expr x = maybe_input_dropout(g, g.lookup(*p.emb.matrix, ids), drop);
  Mat rec_mask;
  const Mat* maskp = nullptr;
  if (drops_on(drop) && drop.recurrent > 0.0) {
    rec_mask = dropout_mask(p.lstm.hidden, 1, drop.recurrent, *drop.rng);
    maskp = &rec_mask;
  }
  LstmState state = lstm_initial(g, p.lstm);
  for (int t = 0; t < x.cols(); ++t)
    state = lstm_step(g, p.lstm, col(x, t), state, maskp);
  return state.h;
}

}  // namespace udkit::nn
