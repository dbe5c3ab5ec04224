#include "udkit/lemmatizer.hpp"

#include <fstream>

#include "udkit/error.hpp"
#include "udkit/nn/serialize.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

using nn::Expr;
using nn::Graph;
using nn::Mat;
using namespace nn;  // graph ops

namespace {

// Variants per key in first-seen order; the strict-majority modal wins,
// so the earliest of any tie is kept.
template <class K, class OutMap>
class ModalMap {
 public:
  void add(const K& key, const std::string& v) {
    auto& variants = seen_[key];
    for (auto& p : variants)
      if (p.first == v) {
        ++p.second;
        return;
      }
    variants.emplace_back(v, 1);
  }
  void reduce(OutMap& out) const {
    for (const auto& [key, variants] : seen_) {
      const auto* best = &variants[0];
      for (const auto& v : variants)
        if (v.second > best->second) best = &v;
      out[key] = {best->first, best->second};
    }
  }

 private:
  std::map<K, std::vector<std::pair<std::string, long>>> seen_;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == '\t') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

}  // namespace

LemmaLexicon build_lemma_lexicons(const conllu::Document& train) {
  ModalMap<std::pair<std::string, std::string>, decltype(LemmaLexicon::pair_map)> pairs;
  ModalMap<std::string, decltype(LemmaLexicon::word_map)> words;
  for (const auto& sent : train.sentences)
    for (const auto& w : sent.words) {
      if (w.form.empty() || w.lemma.empty()) continue;
      pairs.add({w.form, w.upos}, w.lemma);
      words.add(w.form, w.lemma);
    }
  LemmaLexicon lex;
  pairs.reduce(lex.pair_map);
  words.reduce(lex.word_map);
  return lex;
}

void save_lemma_lexicon(const LemmaLexicon& lex, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [key, e] : lex.pair_map)
    out << "P\t" << key.first << '\t' << key.second << '\t' << e.lemma << '\t'
        << e.count << '\n';
  for (const auto& [word, e] : lex.word_map)
    out << "W\t" << word << '\t' << e.lemma << '\t' << e.count << '\n';
}

LemmaLexicon load_lemma_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  LemmaLexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto bad = [&](const char* what) {
      return DataError(path + " line " + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string> f = split_tabs(line);
    long count = 0;
    if (f.size() >= 2) {
      try {
        count = std::stol(f.back());
      } catch (const std::exception&) {
        throw bad("bad count");
      }
    }
    if (f[0] == "P" && f.size() == 5)
      lex.pair_map[{f[1], f[2]}] = {f[3], count};
    else if (f[0] == "W" && f.size() == 4)
      lex.word_map[f[1]] = {f[2], count};
    else
      throw bad("expected P/W record");
  }
  return lex;
}

EditLabel assign_edit_label(const std::string& word, const std::string& lemma) {
  if (lemma == word) return EditLabel::kIdentity;
  if (lemma == utf8::to_lower(word)) return EditLabel::kLowercase;
  return EditLabel::kSeq2Seq;
}

Seq2SeqConfig lemmatizer_defaults() {
  Seq2SeqConfig cfg;
  cfg.emb_dim = 50;
  cfg.enc_hidden = 100;
  cfg.dec_hidden = 200;
  return cfg;
}

Seq2SeqTrainConfig lemmatizer_train_defaults() {
  Seq2SeqTrainConfig tc;
  tc.max_epochs = 60;
  return tc;
}

LemmatizerModel make_lemmatizer(const Seq2SeqConfig& cfg, Vocab symbols,
                                uint64_t seed) {
  LemmatizerModel m;
  nn::Rng rng(seed);
  m.s2s = make_seq2seq(m.pc, "lemma", cfg, std::move(symbols), rng);
  int h = 2 * cfg.enc_hidden;
  m.edit_w1 = &m.pc.add("lemma.edit.w1", h, h);
  m.edit_b1 = &m.pc.add("lemma.edit.b1", h, 1);
  m.edit_w2 = &m.pc.add("lemma.edit.w2", 3, h);
  m.edit_b2 = &m.pc.add("lemma.edit.b2", 3, 1);
  init_uniform_fan_in(m.edit_w1->value, rng);
  init_uniform_fan_in(m.edit_w2->value, rng);
  return m;
}

void save_lemmatizer(const LemmatizerModel& m, const std::string& path) {
  nn::ModelHeader h;
  h.type = "lemmatizer";
  h.hparams = {{"emb_dim", m.s2s.cfg.emb_dim},
               {"enc_hidden", m.s2s.cfg.enc_hidden},
               {"dec_hidden", m.s2s.cfg.dec_hidden},
               {"dropout", m.s2s.cfg.dropout},
               {"beam_size", m.s2s.cfg.beam_size}};
  h.vocabs["symbols"] = m.s2s.vocab.items();
  save_model(path, h, m.pc);
}

LemmatizerModel load_lemmatizer(const std::string& path) {
  nn::ModelHeader h = nn::read_model_header(path);
  if (h.type != "lemmatizer")
    throw DataError(path + " holds a '" + h.type + "' model, expected lemmatizer");
  Seq2SeqConfig cfg;
  cfg.emb_dim = h.hparams.at("emb_dim").get<int>();
  cfg.enc_hidden = h.hparams.at("enc_hidden").get<int>();
  cfg.dec_hidden = h.hparams.at("dec_hidden").get<int>();
  cfg.dropout = h.hparams.at("dropout").get<double>();
  cfg.beam_size = h.hparams.at("beam_size").get<int>();
  LemmatizerModel m =
      make_lemmatizer(cfg, Vocab::from_items(h.vocabs.at("symbols")), 0);
  load_model_values(path, m.pc);
  return m;
}

Expr edit_logits(Graph& g, const LemmatizerModel& m, Expr enc_final) {
  Expr h = relu(add_colvec(matmul(g.param(*m.edit_w1), enc_final),
                           g.param(*m.edit_b1)));
  return add_colvec(matmul(g.param(*m.edit_w2), h), g.param(*m.edit_b2));
}

namespace {

EditLabel predict_edit(const LemmatizerModel& m, const std::string& word) {
  Graph g;
  EncodeOut enc = encode(g, m.s2s, symbol_ids(m.s2s.vocab, word));
  Mat lg = edit_logits(g, m, enc.dec0.h).val();
  Eigen::Index best;
  lg.col(0).maxCoeff(&best);
  return static_cast<EditLabel>(best);
}

}  // namespace

std::string lemmatize(const std::string& word, const std::string& upos,
                      const LemmaLexicon& lex, const LemmatizerModel* model,
                      LemmaRoute* route) {
  auto set_route = [&](LemmaRoute r) {
    if (route) *route = r;
  };
  if (const LemmaEntry* e = lex.find(word, upos)) {
    set_route(LemmaRoute::kPairDict);
    return e->lemma;
  }
  if (const LemmaEntry* e = lex.find(word)) {
    set_route(LemmaRoute::kWordDict);
    return e->lemma;
  }
  if (!model || word.empty()) {
    set_route(LemmaRoute::kFallback);
    return word;
  }
  switch (predict_edit(*model, word)) {
    case EditLabel::kIdentity:
      set_route(LemmaRoute::kIdentity);
      return word;
    case EditLabel::kLowercase:
      set_route(LemmaRoute::kLowercase);
      return utf8::to_lower(word);
    case EditLabel::kSeq2Seq:
      break;
  }
  std::string out = decode_string(model->s2s, word);
  if (out.empty()) {
    set_route(LemmaRoute::kFallback);
    return word;
  }
  set_route(LemmaRoute::kSeq2Seq);
  return out;
}

void lemmatize_document(conllu::Document& doc, const LemmaLexicon& lex,
                        const LemmatizerModel* model) {
  for (auto& sent : doc.sentences)
    for (auto& w : sent.words) w.lemma = lemmatize(w.form, w.upos, lex, model);
}

LemmatizerModel train_lemmatizer(const conllu::Document& train,
                                 const conllu::Document& dev,
                                 const Seq2SeqConfig& cfg,
                                 const Seq2SeqTrainConfig& tc) {
  struct WL {
    std::string word, lemma;
  };
  auto collect = [](const conllu::Document& d) {
    std::vector<WL> out;
    for (const auto& s : d.sentences)
      for (const auto& w : s.words)
        if (!w.form.empty() && !w.lemma.empty()) out.push_back({w.form, w.lemma});
    return out;
  };
  std::vector<WL> tr = collect(train);
  if (tr.empty()) throw DataError("no (word, lemma) pairs in training data");
  std::vector<WL> dv = collect(dev);

  VocabBuilder vb;
  for (const auto& p : tr) {
    for (char32_t c : utf8::decode(p.word)) vb.count(utf8::encode_one(c));
    for (char32_t c : utf8::decode(p.lemma)) vb.count(utf8::encode_one(c));
  }
  LemmatizerModel m = make_lemmatizer(cfg, vb.build(1, true), tc.seed);

  auto to_examples = [&](const std::vector<WL>& ps) {
    std::vector<Seq2SeqExample> ex;
    for (const auto& p : ps)
      ex.push_back({symbol_ids(m.s2s.vocab, p.word),
                    symbol_ids(m.s2s.vocab, p.lemma)});
    return ex;
  };
  std::vector<int> labels;
  labels.reserve(tr.size());
  for (const auto& p : tr)
    labels.push_back(static_cast<int>(assign_edit_label(p.word, p.lemma)));

  auto edit_ce = [&](Graph& g, size_t idx, const EncodeOut& enc) {
    return nll_cols(edit_logits(g, m, enc.dec0.h),
                    {labels[idx]});
  };
  train_seq2seq(m.pc, m.s2s, to_examples(tr), to_examples(dv), tc, edit_ce);
  return m;
}

EditRatios edit_type_report(const LemmatizerModel& m,
                            const conllu::Document& doc) {
  long counts[3] = {0, 0, 0};
  long total = 0;
  for (const auto& sent : doc.sentences)
    for (const auto& w : sent.words) {
      if (w.form.empty()) continue;
      ++counts[static_cast<int>(predict_edit(m, w.form))];
      ++total;
    }
  EditRatios r;
  if (total == 0) return r;
  r.identity = counts[0] / static_cast<double>(total);
  r.lowercase = counts[1] / static_cast<double>(total);
  r.seq2seq = counts[2] / static_cast<double>(total);
  return r;
}

}  // namespace udkit
