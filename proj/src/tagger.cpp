#include "udkit/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "udkit/error.hpp"
#include "udkit/nn/serialize.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

using nn::Expr;
using nn::Graph;
using nn::Mat;

namespace {

int find_sorted(const std::vector<std::string>& v, const std::string& s) {
  auto it = std::lower_bound(v.begin(), v.end(), s);
  if (it == v.end() || *it != s) return -1;
  return static_cast<int>(it - v.begin());
}

bool missing_tag(const std::string& t) { return t.empty() || t == "_"; }

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

}  // namespace

int TagSpaces::upos_id(const std::string& tag) const { return find_sorted(upos, tag); }
int TagSpaces::xpos_id(const std::string& tag) const { return find_sorted(xpos, tag); }

int TagSpaces::xpos_char_id(size_t pos, const std::string& cp) const {
  if (pos >= xpos_chars.size()) return -1;
  return find_sorted(xpos_chars[pos], cp);
}

int TagSpaces::feat_value_id(size_t key, const std::string& value) const {
  if (key >= feat_values.size()) return -1;
  if (value.empty()) return 0;
  auto it = std::lower_bound(feat_values[key].begin() + 1, feat_values[key].end(), value);
  if (it == feat_values[key].end() || *it != value) return -1;
  return static_cast<int>(it - feat_values[key].begin());
}

XposStrategy select_xpos_strategy(const std::vector<std::string>& xpos, size_t limit,
                                  bool force_shared_fc) {
  if (force_shared_fc || xpos.empty()) return XposStrategy::kSharedFc;
  size_t len = utf8::length(xpos.front());
  bool fixed = std::all_of(xpos.begin(), xpos.end(),
                           [&](const std::string& t) { return utf8::length(t) == len; });
  if (fixed) return XposStrategy::kPerChar;
  if (xpos.size() > limit) return XposStrategy::kSharedFc;
  return XposStrategy::kBiaffine;
}

TagSpaces build_tag_spaces(const conllu::Document& train, size_t xpos_limit,
                           bool force_shared_fc) {
  std::set<std::string> upos, xpos;
  std::map<std::string, std::set<std::string>> feats;
  for (const auto& sent : train.sentences) {
    for (const auto& w : sent.words) {
      if (!missing_tag(w.upos)) upos.insert(w.upos);
      if (!missing_tag(w.xpos)) xpos.insert(w.xpos);
      for (const auto& [k, v] : conllu::parse_feats(w.ufeats)) feats[k].insert(v);
    }
  }
  TagSpaces sp;
  sp.upos.assign(upos.begin(), upos.end());
  sp.xpos.assign(xpos.begin(), xpos.end());
  sp.strategy = select_xpos_strategy(sp.xpos, xpos_limit, force_shared_fc);
  if (sp.strategy == XposStrategy::kPerChar) {
    size_t len = utf8::length(sp.xpos.front());
    std::vector<std::set<std::string>> per(len);
    for (const auto& tag : sp.xpos) {
      auto cps = utf8::decode(tag);
      for (size_t k = 0; k < len; ++k) per[k].insert(utf8::encode_one(cps[k]));
    }
    for (auto& s : per) sp.xpos_chars.emplace_back(s.begin(), s.end());
  }
  for (const auto& [k, vals] : feats) {
    sp.feat_keys.push_back(k);
    std::vector<std::string> vs{""};  // index 0 is the explicit absent value
    vs.insert(vs.end(), vals.begin(), vals.end());
    sp.feat_values.push_back(std::move(vs));
  }
  return sp;
}

WordVectors load_word2vec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ":1: empty embeddings file");
  std::istringstream hs(line);
  long count = -1;
  int dim = 0;
  std::string extra;
  if (!(hs >> count >> dim) || count < 0 || dim <= 0 || (hs >> extra))
    throw DataError(path + ":1: header must be \"count dim\"");
  WordVectors wv;
  wv.dim = dim;
  wv.words.reserve(static_cast<size_t>(count));
  wv.matrix = Mat::Zero(count, dim);
  long row = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= count)
      throw DataError(path + ":" + std::to_string(lineno) + ": more rows than the header declares");
    std::istringstream ls(line);
    std::string w;
    ls >> w;
    for (int d = 0; d < dim; ++d) {
      if (!(ls >> wv.matrix(row, d)))
        throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(dim) + " values after the word");
    }
    double junk;
    if (ls >> junk)
      throw DataError(path + ":" + std::to_string(lineno) + ": more values than the header declares");
    wv.words.push_back(std::move(w));
    ++row;
  }
  if (row != count)
    throw DataError(path + ": header declares " + std::to_string(count) + " rows, found " +
                    std::to_string(row));
  return wv;
}

namespace {

CondHead add_cond_head(nn::ParamCollection& pc, const std::string& prefix, int in_dim,
                       int fc_dim, int cond_dim, int out, nn::Rng& rng) {
  CondHead h;
  h.fc_dim = fc_dim;
  h.out = out;
  h.fc_w = &pc.add(prefix + ".fc.w", fc_dim, in_dim);
  h.fc_b = &pc.add(prefix + ".fc.b", fc_dim, 1);
  h.u = &pc.add(prefix + ".u", out * (cond_dim + 1), fc_dim + 1);
  nn::init_uniform_fan_in(h.fc_w->value, rng);
  nn::init_uniform_fan_in(h.u->value, rng);
  return h;
}

AffineHead add_affine_head(nn::ParamCollection& pc, const std::string& prefix, int out,
                           int in_dim, nn::Rng& rng) {
  AffineHead h;
  h.w = &pc.add(prefix + ".w", out, in_dim);
  h.b = &pc.add(prefix + ".b", out, 1);
  nn::init_uniform_fan_in(h.w->value, rng);
  return h;
}

}  // namespace

TaggerModel make_tagger(const TaggerConfig& cfg, const TagSpaces& spaces,
                        const Vocab& pre_vocab, int pre_dim, const Vocab& freq_vocab,
                        const Vocab& char_vocab, nn::Rng& rng) {
  if (spaces.upos.empty()) throw std::invalid_argument("make_tagger: empty UPOS tagset");
  TaggerModel m;
  m.cfg = cfg;
  m.spaces = spaces;
  auto& pc = m.pc;

  m.pre = make_embedding(pc, "tagger.pre", pre_vocab, pre_dim, rng, /*trainable=*/false);
  m.pre.matrix->value.setZero();  // rows are filled from the vectors file; absent words stay zero
  m.pre_proj_w = &pc.add("tagger.pre.proj.w", cfg.pre_proj_dim, pre_dim);
  m.pre_proj_b = &pc.add("tagger.pre.proj.b", cfg.pre_proj_dim, 1);
  m.pre_drop = &pc.add("tagger.pre.drop", cfg.pre_proj_dim, 1);
  nn::init_uniform_fan_in(m.pre_proj_w->value, rng);

  m.freq = make_embedding(pc, "tagger.freq", freq_vocab, cfg.word_emb_dim, rng);

  m.chars = nn::make_char_lstm(pc, "tagger.char", char_vocab, cfg.char_emb_dim,
                               cfg.char_hidden, rng);
  m.char_proj_w = &pc.add("tagger.char.proj.w", cfg.char_proj_dim, cfg.char_hidden);
  m.char_proj_b = &pc.add("tagger.char.proj.b", cfg.char_proj_dim, 1);
  m.char_drop = &pc.add("tagger.char.drop", cfg.char_proj_dim, 1);
  nn::init_uniform_fan_in(m.char_proj_w->value, rng);

  int x_dim = cfg.pre_proj_dim + cfg.word_emb_dim + cfg.char_proj_dim;
  m.rnn = nn::make_highway_bilstm(pc, "tagger.rnn", x_dim, cfg.layers, cfg.hidden, rng);
  int h_dim = 2 * cfg.hidden;

  m.fc_w = &pc.add("tagger.fc.w", cfg.fc_dim, h_dim);
  m.fc_b = &pc.add("tagger.fc.b", cfg.fc_dim, 1);
  nn::init_uniform_fan_in(m.fc_w->value, rng);
  int nu = static_cast<int>(spaces.upos.size());
  m.upos_out = add_affine_head(pc, "tagger.upos.out", nu, cfg.fc_dim, rng);

  bool shared = spaces.strategy == XposStrategy::kSharedFc;
  if (!shared) {
    m.upos_emb = &pc.add("tagger.upos.emb", nu, cfg.upos_emb_dim);
    nn::init_normal(m.upos_emb->value, 1.0 / std::sqrt(static_cast<double>(cfg.upos_emb_dim)),
                    rng);
  }

  int nx = static_cast<int>(spaces.xpos.size());
  switch (spaces.strategy) {
    case XposStrategy::kBiaffine:
      m.xpos_head =
          add_cond_head(pc, "tagger.xpos", h_dim, cfg.fc_dim, cfg.upos_emb_dim, nx, rng);
      break;
    case XposStrategy::kPerChar:
      for (size_t k = 0; k < spaces.xpos_chars.size(); ++k)
        m.xpos_char_heads.push_back(
            add_cond_head(pc, "tagger.xpos.c" + std::to_string(k), h_dim, cfg.feat_fc_dim,
                          cfg.upos_emb_dim, static_cast<int>(spaces.xpos_chars[k].size()),
                          rng));
      break;
    case XposStrategy::kSharedFc:
      if (nx > 0) m.xpos_out = add_affine_head(pc, "tagger.xpos.out", nx, cfg.fc_dim, rng);
      break;
  }

  for (size_t k = 0; k < spaces.feat_keys.size(); ++k) {
    int nv = static_cast<int>(spaces.feat_values[k].size());
    std::string prefix = "tagger.feat" + std::to_string(k);
    if (shared)
      m.feat_outs.push_back(add_affine_head(pc, prefix + ".out", nv, cfg.fc_dim, rng));
    else
      m.feat_heads.push_back(
          add_cond_head(pc, prefix, h_dim, cfg.feat_fc_dim, cfg.upos_emb_dim, nv, rng));
  }
  return m;
}

TaggerStates tagger_states(Graph& g, const TaggerModel& m,
                           const std::vector<std::string>& forms,
                           const nn::DropoutSpec& drop) {
  if (forms.empty()) throw std::invalid_argument("tagger_states: empty sentence");
  const TaggerConfig& cfg = m.cfg;
  bool word_drop = drop.train && drop.rng != nullptr && cfg.word_dropout > 0.0;

  std::vector<int> pre_ids(forms.size()), freq_ids(forms.size());
  for (size_t i = 0; i < forms.size(); ++i) {
    pre_ids[i] = m.pre.vocab.get(forms[i]);
    freq_ids[i] = m.freq.vocab.get(utf8::to_lower(forms[i]));
  }
  // Each source decides independently whether a word gets its drop vector.
  std::vector<char> pre_gone(forms.size(), 0), char_gone(forms.size(), 0);
  if (word_drop) {
    freq_ids = word_dropout_replace(freq_ids, cfg.word_dropout, *drop.rng);
    std::bernoulli_distribution bern(cfg.word_dropout);
    for (size_t i = 0; i < forms.size(); ++i) {
      pre_gone[i] = bern(*drop.rng) ? 1 : 0;
      char_gone[i] = bern(*drop.rng) ? 1 : 0;
    }
  }

  Expr x_pre = affine(g.param(*m.pre_proj_w), g.lookup(*m.pre.matrix, pre_ids),
                      g.param(*m.pre_proj_b));
  if (word_drop) x_pre = drop_words(g, x_pre, *m.pre_drop, pre_gone);

  Expr x_freq = g.lookup(*m.freq.matrix, freq_ids);

  std::vector<Expr> ch(forms.size());
  for (size_t i = 0; i < forms.size(); ++i)
    ch[i] = nn::char_lstm_embed(g, m.chars, forms[i], drop);
  Expr x_char =
      affine(g.param(*m.char_proj_w), concat_cols(ch), g.param(*m.char_proj_b));
  if (word_drop) x_char = drop_words(g, x_char, *m.char_drop, char_gone);

  Expr x = nn::concat_rows({x_pre, x_freq, x_char});
  Expr h = nn::highway_bilstm(g, m.rnn, x, drop);

  Expr v = relu(affine(g.param(*m.fc_w), maybe_drop(g, h, drop, drop.input),
                       g.param(*m.fc_b)));
  Expr up = affine(g.param(*m.upos_out.w), maybe_drop(g, v, drop, drop.input),
                   g.param(*m.upos_out.b));
  return {h, v, up};
}

Expr cond_scores(Graph& g, const TaggerModel& m, const CondHead& head, Expr h,
                 const std::vector<int>& cond, const nn::DropoutSpec& drop) {
  if (m.upos_emb == nullptr)
    throw std::logic_error("cond_scores: model has no conditioning table");
  Expr v = relu(affine(g.param(*head.fc_w), maybe_drop(g, h, drop, drop.input),
                       g.param(*head.fc_b)));
  Expr vd = maybe_drop(g, v, drop, drop.input);
  Expr u = g.param(*head.u);
  std::vector<Expr> cols(cond.size());
  for (size_t i = 0; i < cond.size(); ++i) {
    Expr e = g.lookup(*m.upos_emb, {cond[i]});
    cols[i] = nn::bilinear_vec(g, u, e, col(vd, static_cast<int>(i)), head.out);
  }
  return concat_cols(cols);
}

namespace {

std::vector<int> predicted_upos(const Mat& upos_scores) {
  std::vector<int> out(static_cast<size_t>(upos_scores.cols()));
  for (int j = 0; j < upos_scores.cols(); ++j)
    out[static_cast<size_t>(j)] = argmax_col(upos_scores, j);
  return out;
}

}  // namespace

SentenceTags tag_sentence(const TaggerModel& m, const std::vector<std::string>& forms,
                          const std::vector<std::string>* gold_upos) {
  if (forms.empty()) throw std::invalid_argument("tag_sentence: empty sentence");
  size_t n = forms.size();
  Graph g;
  TaggerStates st = tagger_states(g, m, forms);
  std::vector<int> pred = predicted_upos(st.upos.val());
  std::vector<int> cond = pred;
  if (gold_upos != nullptr) {
    if (gold_upos->size() != n)
      throw std::invalid_argument("tag_sentence: gold UPOS length mismatch");
    for (size_t i = 0; i < n; ++i) {
      int id = m.spaces.upos_id((*gold_upos)[i]);
      if (id >= 0) cond[i] = id;
    }
  }

  SentenceTags out;
  out.upos.resize(n);
  out.xpos.assign(n, "_");
  out.feats.resize(n);
  for (size_t i = 0; i < n; ++i) out.upos[i] = m.spaces.upos[static_cast<size_t>(pred[i])];

  switch (m.spaces.strategy) {
    case XposStrategy::kBiaffine: {
      Mat s = cond_scores(g, m, m.xpos_head, st.h, cond).val();
      for (size_t i = 0; i < n; ++i)
        out.xpos[i] = m.spaces.xpos[static_cast<size_t>(argmax_col(s, static_cast<int>(i)))];
      break;
    }
    case XposStrategy::kPerChar: {
      std::vector<std::string> tags(n);
      for (size_t k = 0; k < m.xpos_char_heads.size(); ++k) {
        Mat s = cond_scores(g, m, m.xpos_char_heads[k], st.h, cond).val();
        for (size_t i = 0; i < n; ++i)
          tags[i] += m.spaces.xpos_chars[k][static_cast<size_t>(argmax_col(s, static_cast<int>(i)))];
      }
      out.xpos = std::move(tags);
      break;
    }
    case XposStrategy::kSharedFc: {
      if (m.xpos_out.w != nullptr) {
        Mat s = affine(g.param(*m.xpos_out.w), st.v, g.param(*m.xpos_out.b)).val();
        for (size_t i = 0; i < n; ++i)
          out.xpos[i] = m.spaces.xpos[static_cast<size_t>(argmax_col(s, static_cast<int>(i)))];
      }
      break;
    }
  }

  std::vector<Mat> feat_scores(m.spaces.feat_keys.size());
  for (size_t k = 0; k < m.spaces.feat_keys.size(); ++k) {
    if (m.spaces.strategy == XposStrategy::kSharedFc)
      feat_scores[k] = affine(g.param(*m.feat_outs[k].w), st.v, g.param(*m.feat_outs[k].b)).val();
    else
      feat_scores[k] = cond_scores(g, m, m.feat_heads[k], st.h, cond).val();
  }
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (size_t k = 0; k < feat_scores.size(); ++k) {
      int vid = argmax_col(feat_scores[k], static_cast<int>(i));
      if (vid > 0) kv.emplace_back(m.spaces.feat_keys[k], m.spaces.feat_values[k][static_cast<size_t>(vid)]);
    }
    out.feats[i] = conllu::format_feats(std::move(kv));
  }
  return out;
}

void tag_document(conllu::Document& doc, const TaggerModel& m) {
  for (auto& sent : doc.sentences) {
    if (sent.words.empty()) continue;
    std::vector<std::string> forms(sent.words.size());
    for (size_t i = 0; i < sent.words.size(); ++i) forms[i] = sent.words[i].form;
    SentenceTags t = tag_sentence(m, forms);
    for (size_t i = 0; i < sent.words.size(); ++i) {
      sent.words[i].upos = t.upos[i];
      sent.words[i].xpos = t.xpos[i];
      sent.words[i].ufeats = t.feats[i];
    }
  }
}

TaggerTrainConfig tagger_train_defaults() {
  TaggerTrainConfig tc;
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

// Gold targets for one sentence; -1 marks a word a term is skipped for.
struct SentExample {
  std::vector<std::string> forms;
  std::vector<int> upos;
  std::vector<int> xpos;
  std::vector<std::vector<int>> xchar;  // [position][word]
  std::vector<std::vector<int>> feats;  // [key][word]
};

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

double alltags_accuracy(const TaggerModel& m, const conllu::Document& doc) {
  long total = 0, good = 0;
  for (const auto& sent : doc.sentences) {
    if (sent.words.empty()) continue;
    std::vector<std::string> forms(sent.words.size());
    for (size_t i = 0; i < sent.words.size(); ++i) forms[i] = sent.words[i].form;
    SentenceTags t = tag_sentence(m, forms);
    for (size_t i = 0; i < sent.words.size(); ++i) {
      const auto& w = sent.words[i];
      ++total;
      if (t.upos[i] == w.upos && t.xpos[i] == w.xpos &&
          t.feats[i] == conllu::canonical_feats(w.ufeats))
        ++good;
    }
  }
  return total > 0 ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
}

}  // namespace

TaggerModel train_tagger(const conllu::Document& train, const conllu::Document& dev,
                         const WordVectors& vectors, const TaggerConfig& cfg,
                         const TaggerTrainConfig& tc, TaggerTrainStats* stats) {
  TagSpaces spaces = build_tag_spaces(train, cfg.xpos_limit, cfg.force_shared_fc);
  if (spaces.upos.empty()) throw DataError("training document has no UPOS tags");

  Vocab pre_vocab;
  for (const auto& w : vectors.words) pre_vocab.add(w);
  VocabBuilder freq_builder, char_builder;
  std::set<std::string> missing;
  for (const auto& sent : train.sentences) {
    for (const auto& w : sent.words) {
      if (w.form.empty()) continue;
      freq_builder.count(utf8::to_lower(w.form));
      for (char32_t cp : utf8::decode(w.form)) char_builder.count(utf8::encode_one(cp));
      if (!pre_vocab.contains(w.form)) missing.insert(w.form);
    }
  }
  Vocab freq_vocab = freq_builder.build(cfg.freq_threshold);
  Vocab char_vocab = char_builder.build(1);

  nn::Rng rng(tc.seed);
  TaggerModel m = make_tagger(cfg, spaces, pre_vocab, vectors.dim, freq_vocab, char_vocab, rng);
  {
    std::vector<char> filled(static_cast<size_t>(pre_vocab.size()), 0);
    for (size_t r = 0; r < vectors.words.size(); ++r) {
      int id = pre_vocab.get(vectors.words[r]);
      if (id < 3 || filled[static_cast<size_t>(id)]) continue;  // reserved rows stay zero; first duplicate wins
      m.pre.matrix->value.row(id) = vectors.matrix.row(static_cast<Eigen::Index>(r));
      filled[static_cast<size_t>(id)] = 1;
    }
  }

  std::vector<SentExample> examples;
  size_t xlen = spaces.xpos_chars.size();
  for (const auto& sent : train.sentences) {
    if (sent.words.empty()) continue;
    SentExample ex;
    ex.xchar.resize(xlen);
    ex.feats.resize(spaces.feat_keys.size());
    for (const auto& w : sent.words) {
      ex.forms.push_back(w.form);
      ex.upos.push_back(spaces.upos_id(w.upos));
      int xid = spaces.xpos_id(w.xpos);
      ex.xpos.push_back(xid);
      if (xlen > 0) {
        std::vector<char32_t> cps;
        if (xid >= 0) cps = utf8::decode(w.xpos);
        for (size_t k = 0; k < xlen; ++k)
          ex.xchar[k].push_back(xid >= 0 ? spaces.xpos_char_id(k, utf8::encode_one(cps[k]))
                                         : -1);
      }
      auto kv = conllu::parse_feats(w.ufeats);
      for (size_t k = 0; k < spaces.feat_keys.size(); ++k) {
        std::string val;
        for (const auto& [fk, fv] : kv)
          if (fk == spaces.feat_keys[k]) {
            val = fv;
            break;
          }
        ex.feats[k].push_back(spaces.feat_value_id(k, val));
      }
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw DataError("training document has no sentences");

  nn::Rng order_rng(tc.seed + 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t pos = 0;

  auto train_step = [&](int) {
    if (pos == 0) std::shuffle(order.begin(), order.end(), order_rng);
    const SentExample& ex = examples[order[pos]];
    pos = (pos + 1) % order.size();

    Graph g;
    nn::DropoutSpec drop;
    drop.input = cfg.ff_dropout;
    drop.recurrent = cfg.rec_dropout;
    drop.train = true;
    drop.rng = &rng;
    TaggerStates st = tagger_states(g, m, ex.forms, drop);
    std::vector<Expr> terms;
    masked_nll(g, st.upos, ex.upos, terms);

    bool shared = spaces.strategy == XposStrategy::kSharedFc;
    std::vector<int> cond;
    if (!shared) {
      // Gold conditioning, falling back to the current prediction where the
      // gold tag is unavailable.
      cond = ex.upos;
      std::vector<int> pred;
      for (size_t i = 0; i < cond.size(); ++i) {
        if (cond[i] >= 0) continue;
        if (pred.empty()) pred = predicted_upos(st.upos.val());
        cond[i] = pred[i];
      }
    }

    switch (spaces.strategy) {
      case XposStrategy::kBiaffine:
        masked_nll(g, cond_scores(g, m, m.xpos_head, st.h, cond, drop), ex.xpos, terms);
        break;
      case XposStrategy::kPerChar:
        for (size_t k = 0; k < m.xpos_char_heads.size(); ++k)
          masked_nll(g, cond_scores(g, m, m.xpos_char_heads[k], st.h, cond, drop),
                     ex.xchar[k], terms);
        break;
      case XposStrategy::kSharedFc:
        if (m.xpos_out.w != nullptr)
          masked_nll(g,
                     affine(g.param(*m.xpos_out.w), maybe_drop(g, st.v, drop, drop.input),
                            g.param(*m.xpos_out.b)),
                     ex.xpos, terms);
        break;
    }

    for (size_t k = 0; k < spaces.feat_keys.size(); ++k) {
      Expr scores = shared
                        ? affine(g.param(*m.feat_outs[k].w),
                                 maybe_drop(g, st.v, drop, drop.input),
                                 g.param(*m.feat_outs[k].b))
                        : cond_scores(g, m, m.feat_heads[k], st.h, cond, drop);
      masked_nll(g, scores, ex.feats[k], terms);
    }
    g.backward(sum_list(terms));
  };

  auto dev_eval = [&]() { return alltags_accuracy(m, dev); };

  nn::ScheduleResult res = nn::run_schedule(m.pc, tc.schedule, train_step, dev_eval);
  if (stats != nullptr) {
    stats->missing_pretrained = static_cast<long>(missing.size());
    stats->dev_metric = res.best_metric;
    stats->events = res.log;
  }
  return m;
}

void save_tagger(const std::string& path, const TaggerModel& m) {
  nn::ModelHeader h;
  h.type = "tagger";
  const TaggerConfig& c = m.cfg;
  h.hparams["word_emb_dim"] = c.word_emb_dim;
  h.hparams["freq_threshold"] = c.freq_threshold;
  h.hparams["pre_proj_dim"] = c.pre_proj_dim;
  h.hparams["char_emb_dim"] = c.char_emb_dim;
  h.hparams["char_hidden"] = c.char_hidden;
  h.hparams["char_proj_dim"] = c.char_proj_dim;
  h.hparams["layers"] = c.layers;
  h.hparams["hidden"] = c.hidden;
  h.hparams["fc_dim"] = c.fc_dim;
  h.hparams["feat_fc_dim"] = c.feat_fc_dim;
  h.hparams["upos_emb_dim"] = c.upos_emb_dim;
  h.hparams["word_dropout"] = c.word_dropout;
  h.hparams["ff_dropout"] = c.ff_dropout;
  h.hparams["rec_dropout"] = c.rec_dropout;
  h.hparams["xpos_limit"] = c.xpos_limit;
  h.hparams["force_shared_fc"] = c.force_shared_fc;
  h.hparams["strategy"] = static_cast<int>(m.spaces.strategy);
  h.hparams["pre_dim"] = m.pre.dim();
  h.hparams["xpos_len"] = m.spaces.xpos_chars.size();
  h.vocabs["pre"] = m.pre.vocab.items();
  h.vocabs["freq"] = m.freq.vocab.items();
  h.vocabs["chars"] = m.chars.emb.vocab.items();
  h.vocabs["upos"] = m.spaces.upos;
  h.vocabs["xpos"] = m.spaces.xpos;
  h.vocabs["feat_keys"] = m.spaces.feat_keys;
  for (size_t k = 0; k < m.spaces.feat_values.size(); ++k)
    h.vocabs["feat." + std::to_string(k)] = m.spaces.feat_values[k];
  for (size_t k = 0; k < m.spaces.xpos_chars.size(); ++k)
    h.vocabs["xch." + std::to_string(k)] = m.spaces.xpos_chars[k];
  nn::save_model(path, h, m.pc);
}

TaggerModel load_tagger(const std::string& path) {
  nn::ModelHeader h = nn::read_model_header(path);
  if (h.type != "tagger")
    throw DataError(path + " holds a '" + h.type + "' model, expected tagger");
  TaggerConfig c;
  c.word_emb_dim = h.hparams.at("word_emb_dim").get<int>();
  c.freq_threshold = h.hparams.at("freq_threshold").get<long>();
  c.pre_proj_dim = h.hparams.at("pre_proj_dim").get<int>();
  c.char_emb_dim = h.hparams.at("char_emb_dim").get<int>();
  c.char_hidden = h.hparams.at("char_hidden").get<int>();
  c.char_proj_dim = h.hparams.at("char_proj_dim").get<int>();
  c.layers = h.hparams.at("layers").get<int>();
  c.hidden = h.hparams.at("hidden").get<int>();
  c.fc_dim = h.hparams.at("fc_dim").get<int>();
  c.feat_fc_dim = h.hparams.at("feat_fc_dim").get<int>();
  c.upos_emb_dim = h.hparams.at("upos_emb_dim").get<int>();
  c.word_dropout = h.hparams.at("word_dropout").get<double>();
  c.ff_dropout = h.hparams.at("ff_dropout").get<double>();
  c.rec_dropout = h.hparams.at("rec_dropout").get<double>();
  c.xpos_limit = h.hparams.at("xpos_limit").get<size_t>();
  c.force_shared_fc = h.hparams.at("force_shared_fc").get<bool>();

  TagSpaces sp;
  sp.upos = h.vocabs.at("upos");
  sp.xpos = h.vocabs.at("xpos");
  sp.strategy = static_cast<XposStrategy>(h.hparams.at("strategy").get<int>());
  size_t xlen = h.hparams.at("xpos_len").get<size_t>();
  for (size_t k = 0; k < xlen; ++k)
    sp.xpos_chars.push_back(h.vocabs.at("xch." + std::to_string(k)));
  sp.feat_keys = h.vocabs.at("feat_keys");
  for (size_t k = 0; k < sp.feat_keys.size(); ++k)
    sp.feat_values.push_back(h.vocabs.at("feat." + std::to_string(k)));

  nn::Rng rng(1);
  TaggerModel m = make_tagger(c, sp, Vocab::from_items(h.vocabs.at("pre")),
                              h.hparams.at("pre_dim").get<int>(),
                              Vocab::from_items(h.vocabs.at("freq")),
                              Vocab::from_items(h.vocabs.at("chars")), rng);
  load_model_values(path, m.pc);
  return m;
}

}  // namespace udkit
