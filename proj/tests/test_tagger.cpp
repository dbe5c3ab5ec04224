#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/error.hpp"
#include "udkit/mwt.hpp"
#include "udkit/tagger.hpp"
#include "udkit/utf8.hpp"

using namespace udkit;

namespace {

// Toy lexicon where the word fully determines UPOS, and UPOS fully
// determines XPOS and UFeats. A perfectly consistent tagger reaches
// AllTags accuracy equal to its UPOS accuracy on this corpus.
const std::vector<std::pair<std::string, std::string>> kLexicon = {
    {"the", "DET"},   {"a", "DET"},     {"this", "DET"},  {"that", "DET"},
    {"cat", "NOUN"},  {"dog", "NOUN"},  {"house", "NOUN"}, {"fish", "NOUN"},
    {"bird", "NOUN"}, {"tree", "NOUN"}, {"runs", "VERB"}, {"sees", "VERB"},
    {"eats", "VERB"}, {"finds", "VERB"}, {"holds", "VERB"},
};

std::string toy_xpos(const std::string& upos, bool fixed_len) {
  if (fixed_len) return upos == "DET" ? "DT" : upos == "NOUN" ? "NN" : "VB";
  return upos == "DET" ? "D" : upos == "NOUN" ? "NNS" : "VBZD";
}

std::string toy_feats(const std::string& upos) {
  if (upos == "NOUN") return "Number=Sing";
  if (upos == "VERB") return "VerbForm=Fin|Tense=Pres";  // stored out of order on purpose
  return "_";
}

conllu::Document consistency_corpus(int n_sent, uint64_t seed, bool fixed_len,
                                    bool with_xpos = true) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len_d(3, 6);
  std::uniform_int_distribution<size_t> word_d(0, kLexicon.size() - 1);
  conllu::Document doc;
  for (int s = 0; s < n_sent; ++s) {
    conllu::Sentence sent;
    int len = len_d(rng);
    for (int i = 0; i < len; ++i) {
      const auto& [form, upos] = kLexicon[word_d(rng)];
      conllu::Word w;
      w.id = i + 1;
      w.form = form;
      w.lemma = form;
      w.upos = upos;
      w.xpos = with_xpos ? toy_xpos(upos, fixed_len) : "_";
      w.ufeats = toy_feats(upos);
      sent.words.push_back(std::move(w));
    }
    doc.sentences.push_back(std::move(sent));
  }
  return doc;
}

TaggerConfig toy_config() {
  TaggerConfig cfg;
  cfg.word_emb_dim = 12;
  cfg.freq_threshold = 2;
  cfg.pre_proj_dim = 12;
  cfg.char_emb_dim = 8;
  cfg.char_hidden = 12;
  cfg.char_proj_dim = 12;
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.fc_dim = 24;
  cfg.feat_fc_dim = 12;
  cfg.upos_emb_dim = 8;
  cfg.word_dropout = 0.05;
  cfg.ff_dropout = 0.1;
  cfg.rec_dropout = 0.1;
  return cfg;
}

TaggerTrainConfig toy_sched(uint64_t seed, int max_steps, int patience) {
  TaggerTrainConfig tc = tagger_train_defaults();
  tc.seed = seed;
  tc.schedule.max_steps = max_steps;
  tc.schedule.eval_interval = 100;
  tc.schedule.patience = patience;
  return tc;
}

void write_vec_file(const std::string& path, const std::vector<std::string>& words,
                    int dim) {
  std::ofstream out(path);
  out << words.size() << " " << dim << "\n";
  for (size_t i = 0; i < words.size(); ++i) {
    out << words[i];
    for (int d = 0; d < dim; ++d) out << " " << 0.05 * double(i + 1) - 0.02 * d;
    out << "\n";
  }
}

WordVectors toy_vectors(const std::string& tmp_name,
                        const std::vector<std::string>& words, int dim) {
  write_vec_file(tmp_name, words, dim);
  WordVectors wv = load_word2vec(tmp_name);
  std::remove(tmp_name.c_str());
  return wv;
}

std::vector<std::string> forms_of(const conllu::Sentence& sent) {
  std::vector<std::string> out;
  for (const auto& w : sent.words) out.push_back(w.form);
  return out;
}

struct Acc {
  double upos = 0.0;
  double alltags = 0.0;
};

Acc measure(const TaggerModel& m, const conllu::Document& doc) {
  long total = 0, upos_ok = 0, all_ok = 0;
  for (const auto& sent : doc.sentences) {
    SentenceTags t = tag_sentence(m, forms_of(sent));
    for (size_t i = 0; i < sent.words.size(); ++i) {
      const auto& w = sent.words[i];
      ++total;
      bool u = t.upos[i] == w.upos;
      if (u) ++upos_ok;
      if (u && t.xpos[i] == w.xpos && t.feats[i] == conllu::canonical_feats(w.ufeats))
        ++all_ok;
    }
  }
  REQUIRE(total > 0);
  return {double(upos_ok) / double(total), double(all_ok) / double(total)};
}

bool canonical_feat_string(const std::string& s) {
  if (s == "_") return true;
  auto kv = conllu::parse_feats(s);
  size_t pipes = size_t(std::count(s.begin(), s.end(), '|'));
  if (kv.size() != pipes + 1) return false;  // duplicate keys collapse in the parse
  for (size_t i = 1; i < kv.size(); ++i)
    if (!(kv[i - 1].first < kv[i].first)) return false;
  return conllu::format_feats(kv) == s;
}

// Small fully specified model for the rigged-weight checks.
TaggerModel rigged_model(const std::vector<std::string>& upos,
                         const std::vector<std::string>& xpos, uint64_t seed) {
  TagSpaces sp;
  sp.upos = upos;
  sp.xpos = xpos;
  sp.strategy = select_xpos_strategy(sp.xpos);
  sp.feat_keys = {"Case"};
  sp.feat_values = {{"", "Acc", "Nom"}};
  TaggerConfig cfg = toy_config();
  cfg.hidden = 4;
  cfg.fc_dim = 5;
  cfg.feat_fc_dim = 3;
  cfg.upos_emb_dim = 3;
  Vocab pre, freq;
  pre.add("ab");
  VocabBuilder cb;
  cb.count("a");
  cb.count("b");
  nn::Rng rng(seed);
  return make_tagger(cfg, sp, pre, 4, freq, cb.build(1), rng);
}

}  // namespace

TEST_CASE("tagger: default hyperparameters") {
  TaggerConfig cfg = tagger_defaults();
  CHECK(cfg.word_emb_dim == 75);
  CHECK(cfg.freq_threshold == 7);
  CHECK(cfg.pre_proj_dim == 125);
  CHECK(cfg.char_proj_dim == 125);
  CHECK(cfg.layers == 2);
  CHECK(cfg.hidden == 200);
  CHECK(cfg.fc_dim == 400);
  CHECK(cfg.feat_fc_dim == 100);
  CHECK(cfg.upos_emb_dim == 50);
  CHECK(cfg.word_dropout == 0.33);
  CHECK(cfg.ff_dropout == 0.5);
  CHECK(cfg.rec_dropout == 0.5);
  CHECK(cfg.xpos_limit == 250);

  TaggerTrainConfig tc = tagger_train_defaults();
  CHECK(tc.schedule.adam.lr == 0.003);
  CHECK(tc.schedule.adam.beta1 == 0.9);
  CHECK(tc.schedule.adam.beta2 == 0.95);
  CHECK(tc.schedule.patience == 3000);
  CHECK(tc.schedule.switch_to_amsgrad);
}

TEST_CASE("tagger: xpos strategy selection") {
  CHECK(select_xpos_strategy({"NN1", "VB2", "JJ3"}) == XposStrategy::kPerChar);
  CHECK(select_xpos_strategy({}) == XposStrategy::kSharedFc);
  CHECK(select_xpos_strategy({"DT", "NN", "NNS", "VB", "VBD", "JJ"}) ==
        XposStrategy::kBiaffine);
  CHECK(select_xpos_strategy({"NN1", "VB2", "JJ3"}, 250, true) ==
        XposStrategy::kSharedFc);

  // Codepoint length, not byte length, decides fixedness.
  CHECK(select_xpos_strategy({utf8::to_lower("ÀB"), "ÇD", "EF"}) ==
        XposStrategy::kPerChar);

  std::vector<std::string> big;
  for (int i = 0; i < 251; ++i) big.push_back("T" + std::to_string(i));
  CHECK(big.size() == 251);
  CHECK(select_xpos_strategy(big) == XposStrategy::kSharedFc);

  // A fixed-length tagset keeps the per-character head even past the size cutoff.
  std::vector<std::string> big_fixed;
  for (int i = 100; i < 400; ++i) big_fixed.push_back("T" + std::to_string(i));
  CHECK(select_xpos_strategy(big_fixed) == XposStrategy::kPerChar);
}

TEST_CASE("tagger: tag spaces from a training document") {
  conllu::Document doc;
  conllu::Sentence sent;
  auto push = [&](const std::string& form, const std::string& upos,
                  const std::string& xpos, const std::string& feats) {
    conllu::Word w;
    w.id = int(sent.words.size()) + 1;
    w.form = form;
    w.upos = upos;
    w.xpos = xpos;
    w.ufeats = feats;
    sent.words.push_back(w);
  };
  push("b", "VERB", "VB", "Tense=Past");
  push("a", "NOUN", "NN", "Number=Sing|Case=Nom");
  push("c", "_", "_", "_");
  push("d", "NOUN", "JJ", "Number=Plur");
  doc.sentences.push_back(sent);

  TagSpaces sp = build_tag_spaces(doc);
  CHECK(sp.upos == std::vector<std::string>{"NOUN", "VERB"});
  CHECK(sp.xpos == std::vector<std::string>{"JJ", "NN", "VB"});
  CHECK(sp.strategy == XposStrategy::kPerChar);
  REQUIRE(sp.xpos_chars.size() == 2);
  CHECK(sp.xpos_chars[0] == std::vector<std::string>{"J", "N", "V"});
  CHECK(sp.xpos_chars[1] == std::vector<std::string>{"B", "J", "N"});
  CHECK(sp.feat_keys == std::vector<std::string>{"Case", "Number", "Tense"});
  REQUIRE(sp.feat_values.size() == 3);
  CHECK(sp.feat_values[0] == std::vector<std::string>{"", "Nom"});
  CHECK(sp.feat_values[1] == std::vector<std::string>{"", "Plur", "Sing"});
  CHECK(sp.feat_values[2] == std::vector<std::string>{"", "Past"});
  CHECK(sp.upos_id("VERB") == 1);
  CHECK(sp.upos_id("_") == -1);
  CHECK(sp.xpos_id("NN") == 1);
  CHECK(sp.feat_value_id(1, "") == 0);
  CHECK(sp.feat_value_id(1, "Sing") == 2);
  CHECK(sp.feat_value_id(1, "Dual") == -1);
}

TEST_CASE("tagger: word2vec text loading") {
  std::string path = "toy_vectors.txt";
  write_vec_file(path, {"alpha", "beta", "gamma"}, 3);
  WordVectors wv = load_word2vec(path);
  CHECK(wv.dim == 3);
  REQUIRE(wv.words.size() == 3);
  CHECK(wv.words[1] == "beta");
  CHECK(wv.matrix.rows() == 3);
  CHECK(wv.matrix(0, 0) == doctest::Approx(0.05));
  CHECK(wv.matrix(2, 1) == doctest::Approx(0.15 - 0.02));
  std::remove(path.c_str());

  auto write_and_load = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
    out.close();
    return load_word2vec(path);
  };
  CHECK_THROWS_AS(write_and_load(""), DataError);
  CHECK_THROWS_AS(write_and_load("oops\n"), DataError);
  CHECK_THROWS_AS(write_and_load("2 2\na 1 2\n"), DataError);           // too few rows
  CHECK_THROWS_AS(write_and_load("1 2\na 1 2\nb 3 4\n"), DataError);    // too many rows
  CHECK_THROWS_AS(write_and_load("1 3\na 1 2\n"), DataError);           // short vector
  CHECK_THROWS_AS(write_and_load("1 1\na 1 2\n"), DataError);           // long vector
  CHECK_THROWS_AS(write_and_load("1 2 9\na 1 2\n"), DataError);         // bad header
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_word2vec("no_such_vectors.txt"), DataError);
}

TEST_CASE("tagger: all-zero weights tie-break to the first tag") {
  TaggerModel m = rigged_model({"A", "B"}, {"X", "YY"}, 11);
  REQUIRE(m.spaces.strategy == XposStrategy::kBiaffine);
  for (auto* p : m.pc.all()) p->value.setZero();
  SentenceTags t = tag_sentence(m, {"ab", "ba", "zq"});
  for (size_t i = 0; i < 3; ++i) {
    CHECK(t.upos[i] == "A");
    CHECK(t.xpos[i] == "X");
    CHECK(t.feats[i] == "_");  // feature argmax lands on the absent value
  }
}

TEST_CASE("tagger: zero bilinear tensor ignores the conditioning tag") {
  TaggerModel m = rigged_model({"A", "B"}, {"X", "YY"}, 12);
  nn::Graph g;
  nn::Mat hmat(2 * m.cfg.hidden, 2);
  for (int r = 0; r < hmat.rows(); ++r)
    for (int c = 0; c < hmat.cols(); ++c) hmat(r, c) = 0.1 * r - 0.07 * c + 0.01;
  nn::Expr h = g.constant(hmat);

  m.xpos_head.u->value.setZero();
  nn::Mat s0 = cond_scores(g, m, m.xpos_head, h, {0, 0}).val();
  nn::Mat s1 = cond_scores(g, m, m.xpos_head, h, {1, 1}).val();
  CHECK(s0.isZero(0.0));
  CHECK(s1.isZero(0.0));

  // With a nonzero tensor the conditioning tag matters.
  nn::Rng rng(5);
  nn::init_uniform_fan_in(m.xpos_head.u->value, rng);
  nn::Graph g2;
  nn::Expr h2 = g2.constant(hmat);
  nn::Mat r0 = cond_scores(g2, m, m.xpos_head, h2, {0, 0}).val();
  nn::Mat r1 = cond_scores(g2, m, m.xpos_head, h2, {1, 1}).val();
  CHECK((r0 - r1).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("tagger: conditioned head matches a scalar-loop oracle") {
  TaggerModel m = rigged_model({"A", "B"}, {"X", "YY", "ZZZ"}, 13);
  const CondHead& head = m.xpos_head;
  REQUIRE(head.out == 3);
  int h_dim = 2 * m.cfg.hidden;
  int fc = head.fc_dim;
  int e_dim = m.cfg.upos_emb_dim;

  for (int r = 0; r < fc; ++r) {
    for (int c = 0; c < h_dim; ++c) head.fc_w->value(r, c) = 0.07 * r - 0.03 * c + 0.01;
    head.fc_b->value(r, 0) = 0.02 * r - 0.01;
  }
  for (int r = 0; r < head.u->value.rows(); ++r)
    for (int c = 0; c < head.u->value.cols(); ++c)
      head.u->value(r, c) = 0.01 * (r + 1) - 0.004 * c * ((r % 3) + 1);
  for (int r = 0; r < m.upos_emb->value.rows(); ++r)
    for (int c = 0; c < e_dim; ++c) m.upos_emb->value(r, c) = 0.2 * r - 0.15 * c + 0.05;

  nn::Mat hmat(h_dim, 2);
  for (int r = 0; r < h_dim; ++r)
    for (int c = 0; c < 2; ++c) hmat(r, c) = 0.09 * r - 0.04 * c - 0.1;
  std::vector<int> cond = {1, 0};

  nn::Graph g;
  nn::Mat got = cond_scores(g, m, head, g.constant(hmat), cond).val();
  REQUIRE(got.rows() == 3);
  REQUIRE(got.cols() == 2);

  for (int j = 0; j < 2; ++j) {
    // v = relu(W h + b), vt = [v;1], et = [e;1], score(k) = et' U_k vt
    std::vector<double> vt(size_t(fc) + 1, 1.0);
    for (int r = 0; r < fc; ++r) {
      double acc = head.fc_b->value(r, 0);
      for (int c = 0; c < h_dim; ++c) acc += head.fc_w->value(r, c) * hmat(c, j);
      vt[size_t(r)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> et(size_t(e_dim) + 1, 1.0);
    for (int c = 0; c < e_dim; ++c) et[size_t(c)] = m.upos_emb->value(cond[size_t(j)], c);
    for (int k = 0; k < 3; ++k) {
      double score = 0.0;
      for (int a = 0; a <= e_dim; ++a)
        for (int b = 0; b <= fc; ++b)
          score += et[size_t(a)] * head.u->value(k * (e_dim + 1) + a, b) * vt[size_t(b)];
      CHECK(got(k, j) == doctest::Approx(score).epsilon(1e-12));
    }
  }
}

TEST_CASE("tagger: frequent-word vocabulary is uncased and thresholded") {
  conllu::Document doc;
  auto add_sent = [&](const std::string& det, const std::string& noun) {
    conllu::Sentence s;
    conllu::Word w1, w2;
    w1.id = 1;
    w1.form = det;
    w1.upos = "DET";
    w1.xpos = "D";
    w2.id = 2;
    w2.form = noun;
    w2.upos = "NOUN";
    w2.xpos = "NNS";
    s.words = {w1, w2};
    doc.sentences.push_back(s);
  };
  for (int i = 0; i < 6; ++i) add_sent("the", "cat");
  add_sent("The", "dog");

  WordVectors wv = toy_vectors("freq_vectors.txt", {"the"}, 4);
  TaggerConfig cfg = toy_config();
  cfg.freq_threshold = 7;
  TaggerTrainConfig tc = toy_sched(3, 2, 2);
  tc.schedule.eval_interval = 1;
  TaggerTrainStats stats;
  TaggerModel m = train_tagger(doc, doc, wv, cfg, tc, &stats);

  // "the"+"The" reach the threshold together; "cat" (6) and "dog" (1) do not.
  CHECK(m.freq.vocab.contains("the"));
  CHECK(!m.freq.vocab.contains("The"));
  CHECK(!m.freq.vocab.contains("cat"));
  CHECK(!m.freq.vocab.contains("dog"));

  // Pretrained lookup is exact-case; the three unlisted forms are reported.
  CHECK(m.pre.vocab.contains("the"));
  CHECK(stats.missing_pretrained == 3);
  CHECK(m.pre.matrix->value.row(Vocab::kUnk).isZero(0.0));
  CHECK(!m.pre.matrix->trainable);
}

TEST_CASE("tagger: consistency toy overfits with biaffine conditioning") {
  conllu::Document doc = consistency_corpus(30, 21, /*fixed_len=*/false);
  std::vector<std::string> vec_words = {"the", "a", "cat", "dog", "runs", "sees"};
  WordVectors wv = toy_vectors("toy_vectors_bi.txt", vec_words, 6);

  TaggerTrainStats stats;
  TaggerModel m =
      train_tagger(doc, doc, wv, toy_config(), toy_sched(9, 3000, 800), &stats);
  REQUIRE(m.spaces.strategy == XposStrategy::kBiaffine);
  CHECK(m.upos_emb != nullptr);
  CHECK(m.xpos_head.u != nullptr);
  CHECK(m.xpos_char_heads.empty());
  CHECK(m.xpos_out.w == nullptr);
  CHECK(m.feat_heads.size() == 3);  // Number, Tense, VerbForm
  CHECK(m.feat_outs.empty());

  Acc acc = measure(m, doc);
  CHECK(acc.upos >= 0.99);
  CHECK(acc.alltags == acc.upos);  // tags move in lockstep with UPOS
  CHECK(stats.dev_metric >= 0.99);

  // Dictionary-free forms count as missing pretrained words.
  std::set<std::string> train_forms;
  for (const auto& s : doc.sentences)
    for (const auto& w : s.words) train_forms.insert(w.form);
  long expect_missing = 0;
  for (const auto& f : train_forms)
    if (std::find(vec_words.begin(), vec_words.end(), f) == vec_words.end())
      ++expect_missing;
  CHECK(stats.missing_pretrained == expect_missing);

  // Output strings are canonical and inside the known tagsets.
  for (const auto& sent : doc.sentences) {
    SentenceTags t = tag_sentence(m, forms_of(sent));
    for (size_t i = 0; i < sent.words.size(); ++i) {
      CHECK(m.spaces.upos_id(t.upos[i]) >= 0);
      CHECK(m.spaces.xpos_id(t.xpos[i]) >= 0);
      CHECK(canonical_feat_string(t.feats[i]));
    }
  }

  // Gold conditioning with the model's own predictions changes nothing.
  const auto& sent0 = doc.sentences.front();
  SentenceTags plain = tag_sentence(m, forms_of(sent0));
  SentenceTags gold = tag_sentence(m, forms_of(sent0), &plain.upos);
  CHECK(gold.xpos == plain.xpos);
  CHECK(gold.feats == plain.feats);

  // Inference is deterministic (no dropout outside training).
  SentenceTags again = tag_sentence(m, forms_of(sent0));
  CHECK(again.upos == plain.upos);
  CHECK(again.xpos == plain.xpos);
  CHECK(again.feats == plain.feats);

  // Round trip through the model file.
  std::string path = "tagger_roundtrip.bin";
  save_tagger(path, m);
  TaggerModel m2 = load_tagger(path);
  std::remove(path.c_str());
  CHECK(m2.spaces.strategy == XposStrategy::kBiaffine);
  CHECK(m2.spaces.upos == m.spaces.upos);
  CHECK(m2.pre.matrix->value.isApprox(m.pre.matrix->value));
  CHECK(m2.xpos_head.u->value.isApprox(m.xpos_head.u->value));
  for (const auto& sent : doc.sentences) {
    SentenceTags a = tag_sentence(m, forms_of(sent));
    SentenceTags b = tag_sentence(m2, forms_of(sent));
    CHECK(a.upos == b.upos);
    CHECK(a.xpos == b.xpos);
    CHECK(a.feats == b.feats);
  }

  // tag_document writes the same predictions into the words.
  conllu::Document pred = doc;
  tag_document(pred, m);
  for (size_t s = 0; s < pred.sentences.size(); ++s) {
    SentenceTags t = tag_sentence(m, forms_of(doc.sentences[s]));
    for (size_t i = 0; i < pred.sentences[s].words.size(); ++i) {
      CHECK(pred.sentences[s].words[i].upos == t.upos[i]);
      CHECK(pred.sentences[s].words[i].xpos == t.xpos[i]);
      CHECK(pred.sentences[s].words[i].ufeats == t.feats[i]);
    }
  }
}

TEST_CASE("tagger: per-character strategy stays consistent on a fixed-length tagset") {
  conllu::Document doc = consistency_corpus(30, 33, /*fixed_len=*/true);
  WordVectors wv = toy_vectors("toy_vectors_pc.txt", {"the", "cat", "runs"}, 5);

  TaggerTrainStats stats;
  TaggerModel m =
      train_tagger(doc, doc, wv, toy_config(), toy_sched(17, 3000, 800), &stats);
  REQUIRE(m.spaces.strategy == XposStrategy::kPerChar);
  REQUIRE(m.xpos_char_heads.size() == 2);
  CHECK(m.xpos_head.u == nullptr);
  CHECK(m.xpos_out.w == nullptr);
  CHECK(m.spaces.xpos_chars[0] == std::vector<std::string>{"D", "N", "V"});
  CHECK(m.spaces.xpos_chars[1] == std::vector<std::string>{"B", "N", "T"});

  Acc acc = measure(m, doc);
  CHECK(acc.upos >= 0.95);
  CHECK(acc.alltags == acc.upos);

  // Predicted tags are built one position at a time from the position alphabets.
  for (const auto& sent : doc.sentences) {
    SentenceTags t = tag_sentence(m, forms_of(sent));
    for (const auto& tag : t.xpos) {
      auto cps = utf8::decode(tag);
      REQUIRE(cps.size() == 2);
      CHECK(m.spaces.xpos_char_id(0, utf8::encode_one(cps[0])) >= 0);
      CHECK(m.spaces.xpos_char_id(1, utf8::encode_one(cps[1])) >= 0);
    }
  }
}

TEST_CASE("tagger: forced shared FC drops the conditioning machinery") {
  conllu::Document doc = consistency_corpus(8, 41, /*fixed_len=*/false);
  TagSpaces sp = build_tag_spaces(doc, 250, /*force_shared_fc=*/true);
  CHECK(sp.strategy == XposStrategy::kSharedFc);
  CHECK(sp.xpos_chars.empty());

  TaggerConfig cfg = toy_config();
  cfg.force_shared_fc = true;
  Vocab pre;
  VocabBuilder cb;
  for (const auto& s : doc.sentences)
    for (const auto& w : s.words)
      for (char32_t cp : utf8::decode(w.form)) cb.count(utf8::encode_one(cp));
  nn::Rng rng(2);
  TaggerModel m = make_tagger(cfg, sp, pre, 4, Vocab{}, cb.build(1), rng);
  CHECK(m.upos_emb == nullptr);
  CHECK(m.xpos_head.u == nullptr);
  CHECK(m.xpos_char_heads.empty());
  CHECK(m.xpos_out.w != nullptr);
  CHECK(m.feat_outs.size() == 3);
  CHECK(m.feat_heads.empty());

  // The affine heads read the shared FC; outputs stay inside the tagsets.
  SentenceTags t = tag_sentence(m, {"the", "cat", "runs"});
  for (size_t i = 0; i < 3; ++i) {
    CHECK(m.spaces.upos_id(t.upos[i]) >= 0);
    CHECK(m.spaces.xpos_id(t.xpos[i]) >= 0);
    CHECK(canonical_feat_string(t.feats[i]));
  }

  std::string path = "tagger_shared_roundtrip.bin";
  save_tagger(path, m);
  TaggerModel m2 = load_tagger(path);
  std::remove(path.c_str());
  CHECK(m2.spaces.strategy == XposStrategy::kSharedFc);
  CHECK(m2.upos_emb == nullptr);
  SentenceTags t2 = tag_sentence(m2, {"the", "cat", "runs"});
  CHECK(t2.upos == t.upos);
  CHECK(t2.xpos == t.xpos);
  CHECK(t2.feats == t.feats);
}

TEST_CASE("tagger: unused XPOS trains the shared head and predicts underscores") {
  conllu::Document doc = consistency_corpus(20, 55, false, /*with_xpos=*/false);
  WordVectors wv = toy_vectors("toy_vectors_nx.txt", {"the"}, 4);
  TaggerTrainStats stats;
  TaggerModel m =
      train_tagger(doc, doc, wv, toy_config(), toy_sched(23, 1600, 600), &stats);
  REQUIRE(m.spaces.strategy == XposStrategy::kSharedFc);
  CHECK(m.spaces.xpos.empty());
  CHECK(m.xpos_out.w == nullptr);
  CHECK(m.upos_emb == nullptr);
  CHECK(m.feat_outs.size() == 3);

  Acc acc = measure(m, doc);
  CHECK(acc.upos >= 0.95);
  for (const auto& sent : doc.sentences) {
    SentenceTags t = tag_sentence(m, forms_of(sent));
    for (const auto& x : t.xpos) CHECK(x == "_");
  }
}

TEST_CASE("tagger: input validation") {
  TaggerModel m = rigged_model({"A"}, {"X"}, 19);
  CHECK_THROWS_AS(tag_sentence(m, {}), std::invalid_argument);
  std::vector<std::string> gold = {"A"};
  CHECK_THROWS_AS(tag_sentence(m, {"ab", "ba"}, &gold), std::invalid_argument);

  TagSpaces empty_spaces;
  Vocab pre;
  nn::Rng rng(1);
  CHECK_THROWS_AS(make_tagger(toy_config(), empty_spaces, pre, 4, Vocab{}, Vocab{}, rng),
                  std::invalid_argument);

  Seq2SeqConfig s2s;
  s2s.emb_dim = 4;
  s2s.enc_hidden = 3;
  s2s.dec_hidden = 6;
  VocabBuilder vb;
  vb.count("a");
  MwtModel wrong = make_mwt_model(s2s, vb.build(1, true), 1);
  std::string path = "not_a_tagger.bin";
  save_mwt_model(wrong, path);
  CHECK_THROWS_AS(load_tagger(path), DataError);
  std::remove(path.c_str());
}
