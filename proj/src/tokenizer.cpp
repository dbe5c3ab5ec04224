#include "udkit/tokenizer.hpp"

#include <algorithm>
#include <cmath>

#include "udkit/error.hpp"
#include "udkit/nn/serialize.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

using nn::Expr;
using nn::Graph;
using nn::Mat;
using namespace nn;  // graph ops

namespace {

// Splits on blank lines (a line of only whitespace separates paragraphs),
// then collapses every in-paragraph whitespace run to a single space and
// trims the ends.
std::vector<std::string> normalized_paragraphs(const std::string& raw) {
  std::vector<std::string> out;
  std::vector<char32_t> cps = utf8::decode(raw);
  size_t i = 0;
  while (i < cps.size()) {
    // Skip leading whitespace (including paragraph breaks).
    while (i < cps.size() && utf8::is_space(cps[i])) ++i;
    if (i >= cps.size()) break;
    std::string para;
    bool pending_space = false;
    while (i < cps.size()) {
      if (utf8::is_space(cps[i])) {
        // A whitespace run with two or more newlines ends the paragraph.
        int newlines = 0;
        size_t j = i;
        while (j < cps.size() && utf8::is_space(cps[j])) {
          if (cps[j] == U'\n') ++newlines;
          ++j;
        }
        if (newlines >= 2 || j >= cps.size()) {
          i = j;
          break;
        }
        pending_space = true;
        i = j;
        continue;
      }
      if (pending_space) {
        para += ' ';
        pending_space = false;
      }
      para += utf8::encode_one(cps[i]);
      ++i;
    }
    if (!para.empty()) out.push_back(std::move(para));
  }
  return out;
}

bool is_alnum(char32_t c) { return utf8::is_alpha(c) || utf8::is_digit(c); }

Unit make_unit(const std::vector<char32_t>& cps) {
  Unit u;
  u.text = utf8::encode(cps);
  int nonspace = 0;
  bool first = true;
  bool all_upper = true, all_digit = true;
  for (char32_t c : cps) {
    if (utf8::is_space(c)) {
      if (nonspace == 0) u.starts_space = true;
      continue;
    }
    if (first) {
      u.starts_cap = utf8::is_upper(c);
      first = false;
    }
    ++nonspace;
    all_upper = all_upper && utf8::is_upper(c);
    all_digit = all_digit && utf8::is_digit(c);
  }
  u.fully_cap = nonspace >= 2 && all_upper;
  u.numeric = nonspace >= 1 && all_digit;
  return u;
}

UnitSeq unitize_paragraph(const std::string& para, bool syllable_mode) {
  UnitSeq units;
  std::vector<char32_t> cps = utf8::decode(para);
  if (!syllable_mode) {
    for (char32_t c : cps) units.push_back(make_unit({c}));
    return units;
  }
  size_t i = 0;
  while (i < cps.size()) {
    std::vector<char32_t> buf;
    while (i < cps.size() && utf8::is_space(cps[i])) buf.push_back(cps[i++]);
    if (i >= cps.size()) {
      // Trailing whitespace (not produced by normalization, but harmless).
      if (!buf.empty()) units.push_back(make_unit(buf));
      break;
    }
    if (is_alnum(cps[i])) {
      while (i < cps.size() && is_alnum(cps[i])) buf.push_back(cps[i++]);
    } else {
      buf.push_back(cps[i++]);  // single symbol
    }
    units.push_back(make_unit(buf));
  }
  return units;
}

// Embedding key: unit text without leading/trailing whitespace (the
// starts-with-whitespace feature carries the spacing); whitespace-only
// units key on a single space.
std::string unit_key(const Unit& u) {
  std::string stripped;
  for (char32_t c : utf8::decode(u.text))
    if (!utf8::is_space(c)) stripped += utf8::encode_one(c);
  return stripped.empty() ? " " : stripped;
}

std::string stripped_text(const Unit& u) {
  std::string s;
  for (char32_t c : utf8::decode(u.text))
    if (!utf8::is_space(c)) s += utf8::encode_one(c);
  return s;
}

bool tag_ends_token(UnitTag t) { return t != UnitTag::kOther; }
bool tag_ends_sentence(UnitTag t) { return t == UnitTag::kEos || t == UnitTag::kMws; }
bool tag_marks_mwt(UnitTag t) { return t == UnitTag::kMwt || t == UnitTag::kMws; }

}  // namespace

std::vector<UnitSeq> unitize(const std::string& raw, bool syllable_mode) {
  std::vector<UnitSeq> out;
  for (const std::string& para : normalized_paragraphs(raw))
    out.push_back(unitize_paragraph(para, syllable_mode));
  return out;
}

TokenizerModel make_tokenizer(TokenizerConfig cfg, Vocab units, uint64_t seed) {
  TokenizerModel m;
  m.cfg = cfg;
  m.units = std::move(units);
  nn::Rng rng(seed);
  int in_dim = cfg.emb_dim + 4;
  int out_dim = 2 * cfg.hidden;
  m.emb = &m.pc.add("emb", m.units.size(), cfg.emb_dim);
  nn::init_normal(m.emb->value, 1.0 / std::sqrt(double(cfg.emb_dim)), rng);
  m.emb->value.row(Vocab::kPad).setZero();
  m.rnn1 = nn::make_bilstm(m.pc, "rnn1", in_dim, cfg.hidden, rng);
  for (size_t k = 0; k < cfg.conv_widths.size(); ++k) {
    nn::Param& w = m.pc.add("conv.w" + std::to_string(cfg.conv_widths[k]),
                            cfg.conv_channels, in_dim * cfg.conv_widths[k]);
    nn::init_uniform_fan_in(w.value, rng);
    m.conv_w.push_back(&w);
  }
  int conv_out = cfg.conv_channels * static_cast<int>(cfg.conv_widths.size());
  m.conv_proj_w = &m.pc.add("conv.proj.w", out_dim, conv_out);
  m.conv_proj_b = &m.pc.add("conv.proj.b", out_dim, 1);
  nn::init_uniform_fan_in(m.conv_proj_w->value, rng);
  m.rnn2 = nn::make_bilstm(m.pc, "rnn2", out_dim, cfg.hidden, rng);
  m.w1 = &m.pc.add("w1", 3, out_dim);
  m.w2 = &m.pc.add("w2", 3, out_dim);
  nn::init_uniform_fan_in(m.w1->value, rng);
  nn::init_uniform_fan_in(m.w2->value, rng);
  return m;
}

TokenizerScores score_units(Graph& g, const TokenizerModel& m, const UnitSeq& units,
                            bool training, nn::Rng* rng) {
  if (units.empty()) throw std::invalid_argument("score_units: empty unit sequence");
  int n = static_cast<int>(units.size());
  const TokenizerConfig& cfg = m.cfg;
  bool dropping = training && cfg.use_dropout && cfg.dropout > 0.0 && rng;

  std::vector<int> ids;
  ids.reserve(units.size());
  std::bernoulli_distribution unk(cfg.unk_replace_p);
  for (const Unit& u : units) {
    int id = m.units.get(unit_key(u));
    if (training && rng && cfg.unk_replace_p > 0.0 && unk(*rng)) id = Vocab::kUnk;
    ids.push_back(id);
  }
  Mat feats(4, n);
  for (int t = 0; t < n; ++t) {
    const Unit& u = units[static_cast<size_t>(t)];
    feats(0, t) = u.starts_space ? 1.0 : 0.0;
    feats(1, t) = u.starts_cap ? 1.0 : 0.0;
    feats(2, t) = u.fully_cap ? 1.0 : 0.0;
    feats(3, t) = u.numeric ? 1.0 : 0.0;
  }
  Expr e = g.lookup(*m.emb, ids);
  if (dropping)
    e = cmul(e, g.constant(nn::dropout_mask(e.rows(), n, cfg.dropout, *rng)));
  Expr x = concat_rows({e, g.constant(feats)});

  Expr h1 = nn::bilstm_run(g, m.rnn1, x, {});
  if (cfg.use_conv) {
    std::vector<Expr> conv_outs;
    for (size_t k = 0; k < m.conv_w.size(); ++k)
      conv_outs.push_back(conv1d(x, g.param(*m.conv_w[k]), cfg.conv_widths[k]));
    Expr conv = relu(concat_rows(conv_outs));
    h1 = add(h1, affine(g.param(*m.conv_proj_w), conv, g.param(*m.conv_proj_b)));
  }
  if (dropping)
    h1 = cmul(h1, g.constant(nn::dropout_mask(h1.rows(), n, cfg.dropout, *rng)));

  Expr s1 = matmul(g.param(*m.w1), h1);
  Expr gate;
  Expr layer2_in = h1;
  if (cfg.use_gating) {
    gate = sigmoid(mul_scalar(rows(s1, 0, 1), 1.0 / cfg.gate_temperature));
    if (training && rng && cfg.gate_noise_p > 0.0) {
      // Independently force gate values to 1.
      std::bernoulli_distribution force(cfg.gate_noise_p);
      Mat keep = Mat::Ones(1, n), one = Mat::Zero(1, n);
      for (int t = 0; t < n; ++t)
        if (force(*rng)) {
          keep(0, t) = 0.0;
          one(0, t) = 1.0;
        }
      gate = add(cmul(gate, g.constant(keep)), g.constant(one));
    }
    layer2_in = scale_cols(h1, gate);
  } else {
    gate = g.constant(Mat::Ones(1, n));
  }

  Expr h2 = nn::bilstm_run(g, m.rnn2, layer2_in, {});
  if (dropping)
    h2 = cmul(h2, g.constant(nn::dropout_mask(h2.rows(), n, cfg.dropout, *rng)));
  Expr s2 = matmul(g.param(*m.w2), h2);

  return {s1, s2, add(s1, s2), gate};
}

Mat tag_distribution(const Mat& s) {
  auto sig = [](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  };
  Mat p(5, s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    double tok = sig(s(0, j)), sent = sig(s(1, j)), mwt = sig(s(2, j));
    p(0, j) = tok * (1 - sent) * (1 - mwt);  // EOT
    p(1, j) = tok * sent * (1 - mwt);        // EOS
    p(2, j) = tok * (1 - sent) * mwt;        // MWT
    p(3, j) = tok * sent * mwt;              // MWS
    p(4, j) = 1 - tok;                       // OTHER
  }
  return p;
}

std::vector<UnitTag> argmax_tags(const Mat& summed) {
  Mat p = tag_distribution(summed);
  std::vector<UnitTag> tags;
  tags.reserve(static_cast<size_t>(p.cols()));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::Index best;
    p.col(j).maxCoeff(&best);
    static const UnitTag order[5] = {UnitTag::kEot, UnitTag::kEos, UnitTag::kMwt,
                                     UnitTag::kMws, UnitTag::kOther};
    tags.push_back(order[best]);
  }
  return tags;
}

std::vector<conllu::Sentence> decode_segments(const std::vector<UnitTag>& tags,
                                              const UnitSeq& units) {
  if (tags.size() != units.size())
    throw std::invalid_argument("decode_segments: tag/unit length mismatch");
  std::vector<conllu::Sentence> sentences;
  std::string buf;

  struct Pending {
    std::string form;
    bool mwt;
    bool space_after;
  };
  std::vector<Pending> pending;

  auto flush_token = [&](bool mwt, bool space_after) {
    // Surface form keeps internal whitespace, sheds leading/trailing.
    std::vector<char32_t> cps = utf8::decode(buf);
    size_t lo = 0, hi = cps.size();
    while (lo < hi && utf8::is_space(cps[lo])) ++lo;
    while (hi > lo && utf8::is_space(cps[hi - 1])) --hi;
    std::string form = utf8::encode({cps.begin() + lo, cps.begin() + hi});
    if (!form.empty()) pending.push_back({form, mwt, space_after});
    buf.clear();
  };
  auto flush_sentence = [&]() {
    if (pending.empty()) return;
    conllu::Sentence s;
    std::string text;
    for (size_t k = 0; k < pending.size(); ++k) {
      conllu::Word w;
      w.id = static_cast<int>(k) + 1;
      w.form = pending[k].form;
      if (!pending[k].space_after) w.misc = "SpaceAfter=No";
      conllu::Token t;
      t.start_id = t.end_id = w.id;
      t.form = w.form;
      t.mwt = pending[k].mwt;
      text += pending[k].form;
      if (k + 1 < pending.size() && pending[k].space_after) text += ' ';
      s.words.push_back(std::move(w));
      s.tokens.push_back(std::move(t));
    }
    s.text = text;
    sentences.push_back(std::move(s));
    pending.clear();
  };

  for (size_t i = 0; i < units.size(); ++i) {
    buf += units[i].text;
    UnitTag t = tags[i];
    if (tag_ends_token(t)) {
      // Whitespace between this token and the next shows up as the next
      // unit's leading text (char mode: a whitespace unit; syllable mode:
      // attached leading whitespace).
      bool space_after = false;
      if (i + 1 < units.size()) {
        const std::string& next = units[i + 1].text;
        space_after = !next.empty() && utf8::is_space(utf8::decode(next)[0]);
      } else {
        space_after = true;  // paragraph break is whitespace
      }
      flush_token(tag_marks_mwt(t), space_after);
      if (tag_ends_sentence(t)) flush_sentence();
    }
  }
  // Flush rule: unterminated trailing material forms a final token+sentence.
  flush_token(false, true);
  flush_sentence();
  return sentences;
}

conllu::Document tokenize_text(const TokenizerModel& m, const std::string& raw) {
  conllu::Document doc;
  doc.raw_text = raw;
  for (const UnitSeq& para : unitize(raw, m.cfg.syllable_mode)) {
    if (para.empty()) continue;
    Graph g;
    TokenizerScores scores = score_units(g, m, para, false, nullptr);
    for (auto& s : decode_segments(argmax_tags(scores.summed.val()), para))
      doc.sentences.push_back(std::move(s));
  }
  return doc;
}

std::vector<std::vector<UnitTag>> gold_unit_tags(
    const std::vector<UnitSeq>& paragraphs, const conllu::Document& gold) {
  std::vector<std::vector<UnitTag>> tags;
  tags.reserve(paragraphs.size());
  for (const auto& p : paragraphs)
    tags.emplace_back(p.size(), UnitTag::kOther);

  size_t pi = 0;   // paragraph
  size_t ui = 0;   // unit within paragraph
  auto skip_space_units = [&]() {
    while (pi < paragraphs.size()) {
      if (ui >= paragraphs[pi].size()) {
        ++pi;
        ui = 0;
        continue;
      }
      if (stripped_text(paragraphs[pi][ui]).empty()) {
        ++ui;
        continue;
      }
      break;
    }
  };

  for (size_t si = 0; si < gold.sentences.size(); ++si) {
    const conllu::Sentence& sent = gold.sentences[si];
    for (size_t ti = 0; ti < sent.tokens.size(); ++ti) {
      const conllu::Token& tok = sent.tokens[ti];
      skip_space_units();
      // Match whitespace-insensitively: forms may carry internal spaces
      // (multi-syllable tokens) that the unit stream splits on.
      std::string target;
      for (char32_t c : utf8::decode(tok.form))
        if (!utf8::is_space(c)) target += utf8::encode_one(c);
      if (target.empty())
        throw DataError("tokenizer alignment failed in sentence " +
                        std::to_string(si + 1) + ": token '" + tok.form +
                        "' is whitespace-only");
      std::string got;
      size_t last_unit = 0;
      while (got.size() < target.size()) {
        if (pi >= paragraphs.size() || ui >= paragraphs[pi].size())
          throw DataError("tokenizer alignment failed in sentence " +
                          std::to_string(si + 1) + ": ran out of text at token '" +
                          tok.form + "'");
        got += stripped_text(paragraphs[pi][ui]);
        last_unit = ui;
        ++ui;
      }
      if (got != target)
        throw DataError("tokenizer alignment failed in sentence " +
                        std::to_string(si + 1) + ": token '" + tok.form +
                        "' vs text '" + got + "'");
      bool last_tok = ti + 1 == sent.tokens.size();
      UnitTag t = last_tok ? (tok.mwt ? UnitTag::kMws : UnitTag::kEos)
                           : (tok.mwt ? UnitTag::kMwt : UnitTag::kEot);
      tags[pi][last_unit] = t;
    }
  }
  skip_space_units();
  if (pi < paragraphs.size())
    throw DataError("tokenizer alignment failed: text continues past the last "
                    "gold token (paragraph " +
                    std::to_string(pi + 1) + ")");
  return tags;
}

void save_tokenizer(const TokenizerModel& m, const std::string& path) {
  nn::ModelHeader h;
  h.type = "tokenizer";
  h.hparams = {{"syllable_mode", m.cfg.syllable_mode},
               {"emb_dim", m.cfg.emb_dim},
               {"hidden", m.cfg.hidden},
               {"conv_channels", m.cfg.conv_channels},
               {"conv_widths", m.cfg.conv_widths},
               {"gate_temperature", m.cfg.gate_temperature},
               {"gate_noise_p", m.cfg.gate_noise_p},
               {"dropout", m.cfg.dropout},
               {"unk_replace_p", m.cfg.unk_replace_p},
               {"use_gating", m.cfg.use_gating},
               {"use_conv", m.cfg.use_conv},
               {"use_dropout", m.cfg.use_dropout}};
  h.vocabs["units"] = m.units.items();
  save_model(path, h, m.pc);
}

TokenizerModel load_tokenizer(const std::string& path) {
  nn::ModelHeader h = nn::read_model_header(path);
  if (h.type != "tokenizer")
    throw DataError(path + " holds a '" + h.type + "' model, expected tokenizer");
  TokenizerConfig cfg;
  cfg.syllable_mode = h.hparams.at("syllable_mode").get<bool>();
  cfg.emb_dim = h.hparams.at("emb_dim").get<int>();
  cfg.hidden = h.hparams.at("hidden").get<int>();
  cfg.conv_channels = h.hparams.at("conv_channels").get<int>();
  cfg.conv_widths = h.hparams.at("conv_widths").get<std::vector<int>>();
  cfg.gate_temperature = h.hparams.at("gate_temperature").get<double>();
  cfg.gate_noise_p = h.hparams.at("gate_noise_p").get<double>();
  cfg.dropout = h.hparams.at("dropout").get<double>();
  cfg.unk_replace_p = h.hparams.at("unk_replace_p").get<double>();
  cfg.use_gating = h.hparams.at("use_gating").get<bool>();
  cfg.use_conv = h.hparams.at("use_conv").get<bool>();
  cfg.use_dropout = h.hparams.at("use_dropout").get<bool>();
  TokenizerModel m = make_tokenizer(cfg, Vocab::from_items(h.vocabs.at("units")), 0);
  load_model_values(path, m.pc);
  return m;
}

namespace {

// Summed factorized NLL of the gold tags against one score layer.
Expr layer_loss(Graph& g, Expr scores, const std::vector<UnitTag>& tags) {
  int n = scores.cols();
  Mat t_tok(1, n), t_sent(1, n), t_mwt(1, n), boundary(1, n);
  for (int j = 0; j < n; ++j) {
    UnitTag t = tags[static_cast<size_t>(j)];
    bool end = tag_ends_token(t);
    t_tok(0, j) = end ? 1.0 : 0.0;
    boundary(0, j) = end ? 1.0 : 0.0;
    t_sent(0, j) = tag_ends_sentence(t) ? 1.0 : 0.0;
    t_mwt(0, j) = tag_marks_mwt(t) ? 1.0 : 0.0;
  }
  Expr loss = sum_all(bce_logits(rows(scores, 0, 1), t_tok));
  // Sentence and MWT decisions only exist at token boundaries.
  Expr mask = g.constant(boundary);
  loss = add(loss, sum_all(cmul(bce_logits(rows(scores, 1, 1), t_sent), mask)));
  loss = add(loss, sum_all(cmul(bce_logits(rows(scores, 2, 1), t_mwt), mask)));
  return loss;
}

double tag_accuracy(const TokenizerModel& m, const std::vector<UnitSeq>& paras,
                    const std::vector<std::vector<UnitTag>>& gold) {
  long correct = 0, total = 0;
  for (size_t p = 0; p < paras.size(); ++p) {
    if (paras[p].empty()) continue;
    Graph g;
    auto scores = score_units(g, m, paras[p], false, nullptr);
    auto tags = argmax_tags(scores.summed.val());
    for (size_t j = 0; j < tags.size(); ++j) {
      correct += tags[j] == gold[p][j];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

}  // namespace

TokenizerModel train_tokenizer(const std::string& raw_train,
                               const conllu::Document& gold_train,
                               const std::string& raw_dev,
                               const conllu::Document& gold_dev,
                               const TokenizerConfig& cfg,
                               const TokenizerTrainConfig& train) {
  auto train_paras = unitize(raw_train, cfg.syllable_mode);
  auto dev_paras = unitize(raw_dev, cfg.syllable_mode);
  auto train_tags = gold_unit_tags(train_paras, gold_train);
  auto dev_tags = gold_unit_tags(dev_paras, gold_dev);

  VocabBuilder vb;
  for (const auto& p : train_paras)
    for (const Unit& u : p) vb.count(unit_key(u));
  TokenizerModel m = make_tokenizer(cfg, vb.build(1), train.seed);

  nn::Rng rng(train.seed ^ 0x9e3779b97f4a7c15ull);
  nn::ScheduleConfig sched;
  sched.adam.lr = train.lr;
  sched.max_steps = train.max_steps;
  sched.eval_interval = train.eval_interval;
  sched.eval_start = train.eval_start;
  sched.patience = train.max_steps;  // runs to max_steps; lr decays on drops
  sched.switch_to_amsgrad = false;
  sched.lr_decay_on_drop = train.lr_decay_on_drop;

  std::vector<size_t> order;
  for (size_t p = 0; p < train_paras.size(); ++p)
    if (!train_paras[p].empty()) order.push_back(p);
  if (order.empty()) throw DataError("tokenizer training data is empty");

  nn::run_schedule(
      m.pc, sched,
      [&](int step) {
        size_t p = order[static_cast<size_t>(step - 1) % order.size()];
        Graph g;
        auto scores = score_units(g, m, train_paras[p], true, &rng);
        Expr loss = add(layer_loss(g, scores.layer1, train_tags[p]),
                        layer_loss(g, scores.summed, train_tags[p]));
        g.backward(loss);
      },
      [&]() { return tag_accuracy(m, dev_paras, dev_tags); });
  return m;
}

}  // namespace udkit
