#include "udkit/parser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "udkit/error.hpp"
#include "udkit/nn/serialize.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

using nn::Expr;
using nn::Graph;
using nn::Mat;

namespace {

constexpr double kNegInf = -1e18;  // mask value; finite so arithmetic stays NaN-free

int find_sorted(const std::vector<std::string>& v, const std::string& s) {
  auto it = std::lower_bound(v.begin(), v.end(), s);
  if (it == v.end() || *it != s) return -1;
  return static_cast<int>(it - v.begin());
}

Expr maybe_drop(Graph& g, Expr x, const nn::DropoutSpec& drop, double p) {
  if (!drop.train || drop.rng == nullptr || p <= 0.0) return x;
  return cmul(x, g.constant(nn::dropout_mask(x.rows(), x.cols(), p, *drop.rng)));
}

// Word dropout for a vector-valued source: zero the replaced columns and add
// the learned replacement vector there. No inverted-dropout rescaling.
Expr drop_words(Graph& g, Expr x, nn::Param& repl, const std::vector<char>& dropped) {
  int n = x.cols();
  Mat keep = Mat::Ones(1, n), gone = Mat::Zero(1, n);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (!dropped[static_cast<size_t>(i)]) continue;
    keep(0, i) = 0.0;
    gone(0, i) = 1.0;
    any = true;
  }
  if (!any) return x;
  return add(scale_cols(x, g.constant(keep)),
             matmul(g.param(repl), g.constant(gone)));
}

int argmax_col(const Mat& m, int j) {
  Eigen::Index r;
  m.col(j).maxCoeff(&r);
  return static_cast<int>(r);
}

void masked_nll(Graph& g, Expr scores, const std::vector<int>& targets,
                std::vector<Expr>& terms) {
  if (std::all_of(targets.begin(), targets.end(), [](int t) { return t >= 0; })) {
    terms.push_back(nll_cols(scores, targets));
    return;
  }
  for (size_t i = 0; i < targets.size(); ++i)
    if (targets[i] >= 0)
      terms.push_back(nll_cols(col(scores, static_cast<int>(i)), {targets[i]}));
}

}  // namespace

int ParserModel::input_dim() const {
  return cfg.pre_proj_dim + cfg.word_emb_dim + cfg.lemma_emb_dim + cfg.char_proj_dim +
         cfg.tag_emb_dim + cfg.feat_emb_dim;
}

ParserModel make_parser(const ParserConfig& cfg, std::vector<std::string> labels,
                        const ParserVocabs& vocabs, nn::Rng& rng) {
  if (labels.empty()) throw std::invalid_argument("make_parser: empty label set");
  ParserModel m;
  m.cfg = cfg;
  m.labels = std::move(labels);
  auto& pc = m.pc;

  m.pre = make_embedding(pc, "parser.pre", vocabs.pre, vocabs.pre_dim, rng,
                         /*trainable=*/false);
  m.pre.matrix->value.setZero();  // rows are filled from the vectors file; absent words stay zero
  m.pre_proj_w = &pc.add("parser.pre.proj.w", cfg.pre_proj_dim, vocabs.pre_dim);
  m.pre_proj_b = &pc.add("parser.pre.proj.b", cfg.pre_proj_dim, 1);
  m.pre_drop = &pc.add("parser.pre.drop", cfg.pre_proj_dim, 1);
  nn::init_uniform_fan_in(m.pre_proj_w->value, rng);

  m.word = make_embedding(pc, "parser.word", vocabs.word, cfg.word_emb_dim, rng);
  m.lemma = make_embedding(pc, "parser.lemma", vocabs.lemma, cfg.lemma_emb_dim, rng);

  m.chars = nn::make_char_lstm(pc, "parser.char", vocabs.chars, cfg.char_emb_dim,
                               cfg.char_hidden, rng);
  m.char_proj_w = &pc.add("parser.char.proj.w", cfg.char_proj_dim, cfg.char_hidden);
  m.char_proj_b = &pc.add("parser.char.proj.b", cfg.char_proj_dim, 1);
  m.char_drop = &pc.add("parser.char.drop", cfg.char_proj_dim, 1);
  nn::init_uniform_fan_in(m.char_proj_w->value, rng);

  m.upos_emb = make_embedding(pc, "parser.upos", vocabs.upos, cfg.tag_emb_dim, rng);
  m.xpos_emb = make_embedding(pc, "parser.xpos", vocabs.xpos, cfg.tag_emb_dim, rng);
  m.feat_emb = make_embedding(pc, "parser.feat", vocabs.feats, cfg.feat_emb_dim, rng);

  m.root = &pc.add("parser.root", m.input_dim(), 1);
  nn::init_normal(m.root->value, 1.0 / std::sqrt(static_cast<double>(m.input_dim())), rng);

  m.rnn = nn::make_highway_bilstm(pc, "parser.rnn", m.input_dim(), cfg.layers,
                                  cfg.hidden, rng);
  int h_dim = 2 * cfg.hidden;
  m.edge = nn::make_deep_biaffine(pc, "parser.edge", h_dim, cfg.fc_dim, 1, rng);
  m.lin = nn::make_deep_biaffine(pc, "parser.lin", h_dim, cfg.fc_dim, 1, rng);
  m.dist = nn::make_deep_biaffine(pc, "parser.dist", h_dim, cfg.fc_dim, 1, rng);
  m.rel = nn::make_deep_biaffine(pc, "parser.rel", h_dim, cfg.fc_dim,
                                 static_cast<int>(m.labels.size()), rng);
  return m;
}

Expr parser_states(Graph& g, const ParserModel& m, const std::vector<conllu::Word>& words,
                   const nn::DropoutSpec& drop) {
  if (words.empty()) throw std::invalid_argument("parser_states: empty sentence");
  const ParserConfig& cfg = m.cfg;
  size_t n = words.size();
  bool word_drop = drop.train && drop.rng != nullptr && cfg.word_dropout > 0.0;

  std::vector<int> pre_ids(n), word_ids(n), lemma_ids(n), upos_ids(n), xpos_ids(n);
  std::vector<std::vector<int>> feat_ids(n);
  for (size_t i = 0; i < n; ++i) {
    const conllu::Word& w = words[i];
    pre_ids[i] = m.pre.vocab.get(w.form);
    word_ids[i] = m.word.vocab.get(utf8::to_lower(w.form));
    lemma_ids[i] = m.lemma.vocab.get(utf8::to_lower(w.lemma));
    upos_ids[i] = m.upos_emb.vocab.get(w.upos);
    xpos_ids[i] = m.xpos_emb.vocab.get(w.xpos);
    for (const auto& [k, v] : conllu::parse_feats(w.ufeats))
      feat_ids[i].push_back(m.feat_emb.vocab.get(k + "=" + v));
  }

  // Each source decides independently whether a word gets its drop symbol;
  // the UPOS/XPOS pair and the UFeat sum are each dropped as one unit.
  std::vector<char> pre_gone(n, 0), char_gone(n, 0), feat_gone(n, 0);
  if (word_drop) {
    word_ids = word_dropout_replace(word_ids, cfg.word_dropout, *drop.rng);
    lemma_ids = word_dropout_replace(lemma_ids, cfg.word_dropout, *drop.rng);
    std::bernoulli_distribution bern(cfg.word_dropout);
    for (size_t i = 0; i < n; ++i) {
      pre_gone[i] = bern(*drop.rng) ? 1 : 0;
      char_gone[i] = bern(*drop.rng) ? 1 : 0;
      if (bern(*drop.rng)) upos_ids[i] = xpos_ids[i] = Vocab::kDrop;
      feat_gone[i] = bern(*drop.rng) ? 1 : 0;
    }
  }

  Expr x_pre = affine(g.param(*m.pre_proj_w), g.lookup(*m.pre.matrix, pre_ids),
                      g.param(*m.pre_proj_b));
  if (word_drop) x_pre = drop_words(g, x_pre, *m.pre_drop, pre_gone);

  Expr x_word = g.lookup(*m.word.matrix, word_ids);
  Expr x_lemma = g.lookup(*m.lemma.matrix, lemma_ids);

  std::vector<Expr> ch(n);
  for (size_t i = 0; i < n; ++i) ch[i] = nn::char_lstm_embed(g, m.chars, words[i].form, drop);
  Expr x_char =
      affine(g.param(*m.char_proj_w), concat_cols(ch), g.param(*m.char_proj_b));
  if (word_drop) x_char = drop_words(g, x_char, *m.char_drop, char_gone);

  Expr x_tag = add(g.lookup(*m.upos_emb.matrix, upos_ids),
                   g.lookup(*m.xpos_emb.matrix, xpos_ids));

  std::vector<Expr> fe(n);
  for (size_t i = 0; i < n; ++i) {
    if (feat_gone[i])
      fe[i] = g.lookup(*m.feat_emb.matrix, {Vocab::kDrop});
    else if (feat_ids[i].empty())
      fe[i] = g.constant(Mat::Zero(cfg.feat_emb_dim, 1));
    else if (feat_ids[i].size() == 1)
      fe[i] = g.lookup(*m.feat_emb.matrix, feat_ids[i]);
    else
      fe[i] = matmul(g.lookup(*m.feat_emb.matrix, feat_ids[i]),
                     g.constant(Mat::Ones(static_cast<Eigen::Index>(feat_ids[i].size()), 1)));
  }
  Expr x_feat = concat_cols(fe);

  Expr x = nn::concat_rows({x_pre, x_word, x_lemma, x_char, x_tag, x_feat});
  Expr xr = nn::concat_cols({g.param(*m.root), x});  // ROOT at column 0
  return nn::highway_bilstm(g, m.rnn, xr, drop);
}

ScoreTensors score_from_states(Graph& g, const ParserModel& m, Expr h,
                               const nn::DropoutSpec& drop) {
  int np = h.cols();
  ScoreTensors t;
  t.n = np - 1;
  t.edge = nn::deep_biaffine(g, m.edge, h, h, drop);
  t.lin = nn::deep_biaffine(g, m.lin, h, h, drop);
  t.dist_raw = nn::deep_biaffine(g, m.dist, h, h, drop);

  // sgn(i - j) with i the dependent and j the head; positions count ROOT as 0.
  Mat sign(np, np), absd(np, np);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j) {
      sign(i, j) = i > j ? 1.0 : (i < j ? -1.0 : 0.0);
      absd(i, j) = std::abs(i - j);
    }
  t.lin_signed = cmul(t.lin, g.constant(sign));
  t.dist_pred = add_scalar(softplus(t.dist_raw), 1.0);
  t.delta = sub(g.constant(absd), t.dist_pred);

  t.rel_dep = maybe_drop(
      g, relu(affine(g.param(*m.rel.fc_left_w), h, g.param(*m.rel.fc_left_b))), drop,
      drop.input);
  t.rel_head = maybe_drop(
      g, relu(affine(g.param(*m.rel.fc_right_w), h, g.param(*m.rel.fc_right_b))), drop,
      drop.input);
  return t;
}

ScoreTensors score_sentence(Graph& g, const ParserModel& m,
                            const std::vector<conllu::Word>& words,
                            const nn::DropoutSpec& drop) {
  return score_from_states(g, m, parser_states(g, m, words, drop), drop);
}

Mat augmented_edge_scores(const ScoreTensors& t) {
  const Mat& e = t.edge.val();
  const Mat& ls = t.lin_signed.val();
  const Mat& d = t.delta.val();
  Mat a(e.rows(), e.cols());
  for (int i = 0; i < e.rows(); ++i)
    for (int j = 0; j < e.cols(); ++j) {
      double x = ls(i, j);
      double logsig = x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
      a(i, j) = e(i, j) + logsig - std::log1p(0.5 * d(i, j) * d(i, j));
    }
  return a;
}

namespace {

// Chu-Liu/Edmonds on a complete digraph over nodes 0..m-1 with root 0 and
// s(i, j) = weight of edge head j -> dependent i. All maxima scan ascending
// with strict improvement, so ties land on the lowest index.
std::vector<int> cle(const Mat& s) {
  const int m = static_cast<int>(s.rows());
  std::vector<int> best(m, -1);
  for (int i = 1; i < m; ++i) {
    double bs = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      if (s(i, j) > bs) {
        bs = s(i, j);
        best[i] = j;
      }
    }
  }

  std::vector<int> cyc;
  {
    std::vector<int> color(m, 0);
    color[0] = 2;
    for (int start = 1; start < m && cyc.empty(); ++start) {
      if (color[start] != 0) continue;
      std::vector<int> path;
      int u = start;
      while (color[u] == 0) {
        color[u] = 1;
        path.push_back(u);
        u = best[u];
      }
      if (color[u] == 1) {
        auto it = std::find(path.begin(), path.end(), u);
        cyc.assign(it, path.end());
      }
      for (int v : path) color[v] = 2;
    }
  }
  if (cyc.empty()) return best;
  std::sort(cyc.begin(), cyc.end());

  std::vector<char> in_cyc(m, 0);
  for (int v : cyc) in_cyc[v] = 1;
  double cyc_score = 0.0;
  for (int v : cyc) cyc_score += s(v, best[v]);

  // Contract the cycle into node c; outside nodes keep ascending order so the
  // tie rule survives the relabeling.
  std::vector<int> old_of;
  std::vector<int> new_of(m, -1);
  for (int i = 0; i < m; ++i)
    if (!in_cyc[i]) {
      new_of[i] = static_cast<int>(old_of.size());
      old_of.push_back(i);
    }
  const int c = static_cast<int>(old_of.size());
  Mat s2 = Mat::Constant(c + 1, c + 1, kNegInf);
  std::vector<int> into(c, -1), outof(c, -1);  // realizing cycle node per outside node
  for (int a = 0; a < c; ++a) {
    int k = old_of[a];
    for (int b = 0; b < c; ++b) {
      if (a == b) continue;
      s2(a, b) = s(k, old_of[b]);
    }
    double ob = -std::numeric_limits<double>::infinity();
    for (int v : cyc)
      if (s(k, v) > ob) {
        ob = s(k, v);
        outof[a] = v;
      }
    s2(a, c) = ob;
    // Entering the cycle at v breaks v's cycle edge; keep the best trade.
    double ib = -std::numeric_limits<double>::infinity();
    for (int v : cyc) {
      double gain = s(v, k) - s(v, best[v]);
      if (gain > ib) {
        ib = gain;
        into[a] = v;
      }
    }
    s2(c, a) = cyc_score + ib;
  }

  std::vector<int> sub = cle(s2);
  std::vector<int> heads(m, -1);
  for (int v : cyc) heads[v] = best[v];
  for (int x = 1; x <= c; ++x) {
    int hx = sub[x];
    if (x == c) {
      heads[into[hx]] = old_of[hx];  // break the cycle where the outside edge enters
    } else {
      heads[old_of[x]] = hx == c ? outof[x] : old_of[hx];
    }
  }
  return heads;
}

}  // namespace

std::vector<int> decode_mst(const Mat& scores) {
  if (scores.rows() != scores.cols())
    throw std::invalid_argument("decode_mst: score matrix must be square");
  const int np = static_cast<int>(scores.rows());
  if (np < 2) throw std::invalid_argument("decode_mst: no words to attach");
  Mat s = scores;
  for (int i = 0; i < np; ++i) s(i, i) = kNegInf;

  std::vector<int> heads = cle(s);

  int roots = 0;
  for (int i = 1; i < np; ++i)
    if (heads[i] == 0) ++roots;
  if (roots > 1) {
    // Re-decode once per candidate root with every other ROOT edge masked and
    // keep the best-scoring tree. Greedily keeping the single best root edge
    // is not score-optimal, so all candidates are tried; ties stay on the
    // lowest root index.
    double best_total = -std::numeric_limits<double>::infinity();
    for (int r = 1; r < np; ++r) {
      Mat sr = s;
      for (int i = 1; i < np; ++i)
        if (i != r) sr(i, 0) = kNegInf;
      std::vector<int> cand = cle(sr);
      double total = 0.0;
      for (int i = 1; i < np; ++i) total += scores(i, cand[i]);
      if (total > best_total) {
        best_total = total;
        heads = cand;
      }
    }
  }
  heads[0] = 0;
  return heads;
}

Expr relation_scores(Graph& g, const ParserModel& m, const ScoreTensors& t,
                     const std::vector<int>& heads) {
  if (static_cast<int>(heads.size()) != t.n + 1)
    throw std::invalid_argument("relation_scores: heads size mismatch");
  Expr u = g.param(*m.rel.u);
  int out = static_cast<int>(m.labels.size());
  std::vector<Expr> cols;
  for (int i = 1; i <= t.n; ++i) {
    int j = heads[i];
    if (j < 0 || j > t.n)
      throw std::invalid_argument("relation_scores: head index out of range");
    cols.push_back(nn::bilinear_vec(g, u, col(t.rel_head, j), col(t.rel_dep, i), out));
  }
  return concat_cols(cols);
}

std::vector<std::string> assign_relations(Graph& g, const ParserModel& m,
                                          const ScoreTensors& t,
                                          const std::vector<int>& heads) {
  Mat s = relation_scores(g, m, t, heads).val();
  std::vector<std::string> rels(static_cast<size_t>(t.n));
  for (int i = 0; i < t.n; ++i) rels[static_cast<size_t>(i)] = m.labels[argmax_col(s, i)];
  return rels;
}

Expr parser_loss(Graph& g, const ParserModel& m, const ScoreTensors& t,
                 const std::vector<int>& gold_heads, const std::vector<int>& gold_rels) {
  if (static_cast<int>(gold_heads.size()) != t.n + 1 ||
      static_cast<int>(gold_rels.size()) != t.n + 1)
    throw std::invalid_argument("parser_loss: gold annotation size mismatch");
  for (int i = 1; i <= t.n; ++i)
    if (gold_heads[i] > t.n)
      throw std::invalid_argument("parser_loss: gold head out of range");

  std::vector<Expr> terms;
  // Attachment CE on raw edge scores; columns of the transpose are per-word
  // head distributions.
  Expr byhead = colrange(transpose(t.edge), 1, t.n);
  std::vector<int> htarg(gold_heads.begin() + 1, gold_heads.end());
  masked_nll(g, byhead, htarg, terms);

  for (int i = 1; i <= t.n; ++i) {
    int j = gold_heads[i];
    if (j < 0) continue;
    Expr le = rows(col(t.lin_signed, j), i, 1);
    terms.push_back(softplus(neg(le)));  // -log sigmoid at the gold edge
    Expr de = rows(col(t.delta, j), i, 1);
    terms.push_back(log_(add_scalar(mul_scalar(square(de), 0.5), 1.0)));
  }

  Expr u = g.param(*m.rel.u);
  int out = static_cast<int>(m.labels.size());
  for (int i = 1; i <= t.n; ++i) {
    int j = gold_heads[i];
    int r = gold_rels[i];
    if (j < 0 || r < 0) continue;
    Expr s = nn::bilinear_vec(g, u, col(t.rel_head, j), col(t.rel_dep, i), out);
    terms.push_back(nll_cols(s, {r}));
  }
  return sum_list(terms);
}

void parse_document(conllu::Document& doc, const ParserModel& m) {
  for (auto& sent : doc.sentences) {
    if (sent.words.empty()) continue;
    Graph g;
    ScoreTensors t = score_sentence(g, m, sent.words);
    std::vector<int> heads = decode_mst(augmented_edge_scores(t));
    std::vector<std::string> rels = assign_relations(g, m, t, heads);
    for (size_t i = 0; i < sent.words.size(); ++i) {
      sent.words[i].head = heads[i + 1];
      sent.words[i].deprel = rels[i];
    }
  }
}

ParserTrainConfig parser_train_defaults() {
  ParserTrainConfig tc;
  tc.schedule.adam.lr = 0.003;
  tc.schedule.adam.beta1 = 0.9;
  tc.schedule.adam.beta2 = 0.95;
  tc.schedule.max_steps = 20000;
  tc.schedule.eval_interval = 100;
  tc.schedule.patience = 3000;
  tc.schedule.switch_to_amsgrad = true;
  return tc;
}

namespace {

double parser_las(const ParserModel& m, const conllu::Document& doc) {
  long total = 0, good = 0;
  for (const auto& sent : doc.sentences) {
    if (sent.words.empty()) continue;
    Graph g;
    ScoreTensors t = score_sentence(g, m, sent.words);
    std::vector<int> heads = decode_mst(augmented_edge_scores(t));
    std::vector<std::string> rels = assign_relations(g, m, t, heads);
    for (size_t i = 0; i < sent.words.size(); ++i) {
      const conllu::Word& w = sent.words[i];
      if (w.head < 0) continue;
      ++total;
      if (heads[i + 1] == w.head && rels[i] == w.deprel) ++good;
    }
  }
  return total > 0 ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
}

}  // namespace

ParserModel train_parser(const conllu::Document& train, const conllu::Document& dev,
                         const WordVectors& vectors, const ParserConfig& cfg,
                         const ParserTrainConfig& tc, ParserTrainStats* stats) {
  std::set<std::string> labelset;
  for (const auto& sent : train.sentences)
    for (const auto& w : sent.words)
      if (w.head >= 0 && !w.deprel.empty() && w.deprel != "_") labelset.insert(w.deprel);
  if (labelset.empty()) throw DataError("training document has no dependency relations");
  std::vector<std::string> labels(labelset.begin(), labelset.end());

  Vocab pre_vocab;
  for (const auto& w : vectors.words) pre_vocab.add(w);
  VocabBuilder word_b, lemma_b, char_b, upos_b, xpos_b, feat_b;
  std::set<std::string> missing;
  for (const auto& sent : train.sentences) {
    for (const auto& w : sent.words) {
      if (!w.form.empty()) {
        word_b.count(utf8::to_lower(w.form));
        for (char32_t cp : utf8::decode(w.form)) char_b.count(utf8::encode_one(cp));
        if (!pre_vocab.contains(w.form)) missing.insert(w.form);
      }
      if (!w.lemma.empty()) lemma_b.count(utf8::to_lower(w.lemma));
      if (!w.upos.empty()) upos_b.count(w.upos);
      if (!w.xpos.empty()) xpos_b.count(w.xpos);
      for (const auto& [k, v] : conllu::parse_feats(w.ufeats)) feat_b.count(k + "=" + v);
    }
  }
  ParserVocabs vocabs;
  vocabs.pre = std::move(pre_vocab);
  vocabs.word = word_b.build(cfg.freq_threshold);
  vocabs.lemma = lemma_b.build(cfg.freq_threshold);
  vocabs.chars = char_b.build(1);
  vocabs.upos = upos_b.build(1);
  vocabs.xpos = xpos_b.build(1);
  vocabs.feats = feat_b.build(1);
  vocabs.pre_dim = vectors.dim;

  nn::Rng rng(tc.seed);
  ParserModel m = make_parser(cfg, labels, vocabs, rng);
  {
    std::vector<char> filled(static_cast<size_t>(m.pre.vocab.size()), 0);
    for (size_t r = 0; r < vectors.words.size(); ++r) {
      int id = m.pre.vocab.get(vectors.words[r]);
      if (id < 3 || filled[static_cast<size_t>(id)]) continue;  // reserved rows stay zero; first duplicate wins
      m.pre.matrix->value.row(id) = vectors.matrix.row(static_cast<Eigen::Index>(r));
      filled[static_cast<size_t>(id)] = 1;
    }
  }

  struct Ex {
    std::vector<conllu::Word> words;
    std::vector<int> heads;
    std::vector<int> rels;
  };
  std::vector<Ex> examples;
  long with_heads = 0;
  for (const auto& sent : train.sentences) {
    if (sent.words.empty()) continue;
    Ex ex;
    ex.words = sent.words;
    ex.heads.push_back(0);
    ex.rels.push_back(-1);
    int n = static_cast<int>(sent.words.size());
    for (const auto& w : sent.words) {
      if (w.head > n) throw DataError("head index out of range in training sentence");
      ex.heads.push_back(w.head);
      ex.rels.push_back(w.head >= 0 ? find_sorted(m.labels, w.deprel) : -1);
      if (w.head >= 0) ++with_heads;
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw DataError("training document has no sentences");
  if (with_heads == 0) throw DataError("training document has no syntactic heads");

  nn::Rng order_rng(tc.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t pos = 0;

  auto train_step = [&](int) {
    if (pos == 0) std::shuffle(order.begin(), order.end(), order_rng);
    const Ex& ex = examples[order[pos]];
    pos = (pos + 1) % order.size();

    Graph g;
    nn::DropoutSpec drop;
    drop.input = cfg.ff_dropout;
    drop.recurrent = cfg.rec_dropout;
    drop.train = true;
    drop.rng = &rng;
    ScoreTensors t = score_sentence(g, m, ex.words, drop);
    g.backward(parser_loss(g, m, t, ex.heads, ex.rels));
  };

  auto dev_eval = [&]() { return parser_las(m, dev); };

  nn::ScheduleResult res = nn::run_schedule(m.pc, tc.schedule, train_step, dev_eval);
  if (stats != nullptr) {
    stats->missing_pretrained = static_cast<long>(missing.size());
    stats->dev_las = res.best_metric;
    stats->events = res.log;
  }
  return m;
}

void save_parser(const std::string& path, const ParserModel& m) {
  nn::ModelHeader h;
  h.type = "parser";
  const ParserConfig& c = m.cfg;
  h.hparams["word_emb_dim"] = c.word_emb_dim;
  h.hparams["lemma_emb_dim"] = c.lemma_emb_dim;
  h.hparams["freq_threshold"] = c.freq_threshold;
  h.hparams["pre_proj_dim"] = c.pre_proj_dim;
  h.hparams["char_emb_dim"] = c.char_emb_dim;
  h.hparams["char_hidden"] = c.char_hidden;
  h.hparams["char_proj_dim"] = c.char_proj_dim;
  h.hparams["tag_emb_dim"] = c.tag_emb_dim;
  h.hparams["feat_emb_dim"] = c.feat_emb_dim;
  h.hparams["layers"] = c.layers;
  h.hparams["hidden"] = c.hidden;
  h.hparams["fc_dim"] = c.fc_dim;
  h.hparams["word_dropout"] = c.word_dropout;
  h.hparams["ff_dropout"] = c.ff_dropout;
  h.hparams["rec_dropout"] = c.rec_dropout;
  h.hparams["pre_dim"] = m.pre.dim();
  h.vocabs["pre"] = m.pre.vocab.items();
  h.vocabs["word"] = m.word.vocab.items();
  h.vocabs["lemma"] = m.lemma.vocab.items();
  h.vocabs["chars"] = m.chars.emb.vocab.items();
  h.vocabs["upos"] = m.upos_emb.vocab.items();
  h.vocabs["xpos"] = m.xpos_emb.vocab.items();
  h.vocabs["feats"] = m.feat_emb.vocab.items();
  h.vocabs["labels"] = m.labels;
  nn::save_model(path, h, m.pc);
}

ParserModel load_parser(const std::string& path) {
  nn::ModelHeader h = nn::read_model_header(path);
  if (h.type != "parser")
    throw DataError(path + " holds a '" + h.type + "' model, expected parser");
  ParserConfig c;
  c.word_emb_dim = h.hparams.at("word_emb_dim").get<int>();
  c.lemma_emb_dim = h.hparams.at("lemma_emb_dim").get<int>();
  c.freq_threshold = h.hparams.at("freq_threshold").get<long>();
  c.pre_proj_dim = h.hparams.at("pre_proj_dim").get<int>();
  c.char_emb_dim = h.hparams.at("char_emb_dim").get<int>();
  c.char_hidden = h.hparams.at("char_hidden").get<int>();
  c.char_proj_dim = h.hparams.at("char_proj_dim").get<int>();
  c.tag_emb_dim = h.hparams.at("tag_emb_dim").get<int>();
  c.feat_emb_dim = h.hparams.at("feat_emb_dim").get<int>();
  c.layers = h.hparams.at("layers").get<int>();
  c.hidden = h.hparams.at("hidden").get<int>();
  c.fc_dim = h.hparams.at("fc_dim").get<int>();
  c.word_dropout = h.hparams.at("word_dropout").get<double>();
  c.ff_dropout = h.hparams.at("ff_dropout").get<double>();
  c.rec_dropout = h.hparams.at("rec_dropout").get<double>();

  ParserVocabs v;
  v.pre = Vocab::from_items(h.vocabs.at("pre"));
  v.word = Vocab::from_items(h.vocabs.at("word"));
  v.lemma = Vocab::from_items(h.vocabs.at("lemma"));
  v.chars = Vocab::from_items(h.vocabs.at("chars"));
  v.upos = Vocab::from_items(h.vocabs.at("upos"));
  v.xpos = Vocab::from_items(h.vocabs.at("xpos"));
  v.feats = Vocab::from_items(h.vocabs.at("feats"));
  v.pre_dim = h.hparams.at("pre_dim").get<int>();

  nn::Rng rng(1);
  ParserModel m = make_parser(c, h.vocabs.at("labels"), v, rng);
  load_model_values(path, m.pc);
  return m;
}

}  // namespace udkit
