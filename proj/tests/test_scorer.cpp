#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "udkit/conllu.hpp"
#include "udkit/error.hpp"
#include "udkit/scorer.hpp"

using namespace udkit;

namespace {

conllu::Document doc(const std::string& text) { return conllu::read_string(text); }

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) < tol; }

std::vector<double> f1_fields(const EvalReport& r) {
  return {r.tokens, r.sentences, r.words, r.lemmas, r.upos, r.xpos, r.ufeats,
          r.alltags, r.uas,      r.las,   r.clas,   r.mlas, r.blex};
}

conllu::Word mk(int id, const std::string& form, const std::string& lemma,
                const std::string& upos, const std::string& xpos,
                const std::string& feats, int head, const std::string& rel) {
  conllu::Word w;
  w.id = id;
  w.form = form;
  w.lemma = lemma;
  w.upos = upos;
  w.xpos = xpos;
  w.ufeats = feats;
  w.head = head;
  w.deprel = rel;
  return w;
}

// Sentence forms plus optional 2-word surface-token groupings.
struct Shape {
  std::vector<std::vector<std::string>> sents;
  std::vector<std::vector<std::pair<int, int>>> ranges;  // inclusive word id spans
};

Shape random_shape(std::mt19937& rng, bool with_mwt) {
  static const char* kForms[] = {"ka", "to", "mi", "su", "ne"};
  Shape sh;
  int nsent = 1 + static_cast<int>(rng() % 2);
  for (int s = 0; s < nsent; ++s) {
    int n = 2 + static_cast<int>(rng() % 4);
    std::vector<std::string> forms;
    for (int i = 0; i < n; ++i) forms.push_back(kForms[rng() % 5]);
    std::vector<std::pair<int, int>> ranges;
    if (with_mwt) {
      for (int i = 1; i <= n;) {
        if (i + 1 <= n && rng() % 10 < 3) {
          ranges.emplace_back(i, i + 1);
          i += 2;
        } else {
          ++i;
        }
      }
    }
    sh.sents.push_back(std::move(forms));
    sh.ranges.push_back(std::move(ranges));
  }
  return sh;
}

conllu::Document annotate(const Shape& sh, std::mt19937& rng) {
  static const char* kUpos[] = {"NOUN", "VERB"};
  static const char* kXpos[] = {"n", "v", "_"};
  static const char* kFeats[] = {"_", "Number=Sing", "Case=Nom|Number=Sing"};
  static const char* kRels[] = {"nsubj", "det", "root", "obl"};
  static const char* kLemmas[] = {"la", "lo"};
  conllu::Document d;
  for (size_t s = 0; s < sh.sents.size(); ++s) {
    conllu::Sentence sent;
    int n = static_cast<int>(sh.sents[s].size());
    for (int i = 0; i < n; ++i) {
      sent.words.push_back(mk(i + 1, sh.sents[s][i], kLemmas[rng() % 2],
                              kUpos[rng() % 2], kXpos[rng() % 3], kFeats[rng() % 3],
                              static_cast<int>(rng() % (n + 1)), kRels[rng() % 4]));
    }
    int next = 1;
    for (const auto& [a, b] : sh.ranges[s]) {
      for (; next < a; ++next)
        sent.tokens.push_back({next, next, sh.sents[s][next - 1], false, ""});
      // Surface form deliberately differs from the word concatenation.
      sent.tokens.push_back({a, b, sh.sents[s][a - 1] + "x", true, ""});
      next = b + 1;
    }
    for (; next <= n; ++next)
      sent.tokens.push_back({next, next, sh.sents[s][next - 1], false, ""});
    d.sentences.push_back(std::move(sent));
  }
  return d;
}

const char* kIdenticalFixture =
    "1\tThe\tthe\tDET\tDT\tDefinite=Def\t2\tdet\t_\t_\n"
    "2\tcat\tcat\tNOUN\tNN\tNumber=Sing\t3\tnsubj\t_\t_\n"
    "3\tsat\tsit\tVERB\tVBD\tTense=Past\t0\troot\t_\t_\n"
    "4\t.\t.\tPUNCT\t.\t_\t3\tpunct\t_\t_\n"
    "\n"
    "1-2\tVámonos\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "1\tVamos\tir\tVERB\tV\t_\t0\troot\t_\t_\n"
    "2\tnos\tnosotros\tPRON\tP\t_\t1\tobj\t_\t_\n"
    "3\t!\t!\tPUNCT\t.\t_\t1\tpunct\t_\t_\n";

const char* kSplitGold =
    "1\tdo\tdo\tAUX\tVB\t_\t3\taux\t_\t_\n"
    "2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n"
    "3\tstop\tstop\tVERB\tVB\t_\t0\troot\t_\t_\n";

const char* kSplitSystem =
    "1\tdon't\tdon't\tAUX\tVB\t_\t2\taux\t_\t_\n"
    "2\tstop\tstop\tVERB\tVB\t_\t0\troot\t_\t_\n";

}  // namespace

TEST_CASE("scorer: identical documents score 1.0 everywhere") {
  conllu::Document d = doc(kIdenticalFixture);
  Alignment a = align(d, d);
  CHECK_EQ(a.pairs.size(), 7);
  CHECK_EQ(a.tokens_gold, 6);
  CHECK_EQ(a.tokens_correct, 6);
  CHECK_EQ(a.sentences_correct, 2);

  EvalReport r = evaluate(d, d);
  for (double f : f1_fields(r)) CHECK_EQ(f, 1.0);
  CHECK_EQ(r.upos_acc, 1.0);
  CHECK_EQ(r.alltags_acc, 1.0);
  CHECK_EQ(r.pmi, 0.0);
}

TEST_CASE("scorer: token split leaves mismatched words unaligned") {
  conllu::Document g = doc(kSplitGold);
  conllu::Document s = doc(kSplitSystem);
  Alignment a = align(g, s);
  REQUIRE_EQ(a.pairs.size(), 1);
  CHECK_EQ(a.gold[a.pairs[0].gold].form, "stop");
  CHECK_EQ(a.system[a.pairs[0].system].form, "stop");

  EvalReport r = evaluate(g, s);
  CHECK(close(r.tokens, 0.4));
  CHECK(close(r.words, 0.4));
  CHECK(close(r.upos, 0.4));
  CHECK(close(r.lemmas, 0.4));
  CHECK(close(r.uas, 0.4));
  CHECK(close(r.las, 0.4));
  CHECK_EQ(r.sentences, 1.0);
}

TEST_CASE("scorer: token merge mirrors the split case") {
  EvalReport split = evaluate(doc(kSplitGold), doc(kSplitSystem));
  EvalReport merge = evaluate(doc(kSplitSystem), doc(kSplitGold));
  std::vector<double> a = f1_fields(split), b = f1_fields(merge);
  for (size_t i = 0; i < a.size(); ++i) CHECK_EQ(a[i], b[i]);
  CHECK(close(merge.tokens, 0.4));
  CHECK(close(merge.words, 0.4));
}

TEST_CASE("scorer: merged sentences match nothing") {
  conllu::Document g = doc(
      "1\tHi\thi\tINTJ\tUH\t_\t0\troot\t_\t_\n"
      "\n"
      "1\tBye\tbye\tINTJ\tUH\t_\t0\troot\t_\t_\n");
  conllu::Document s = doc(
      "1\tHi\thi\tINTJ\tUH\t_\t0\troot\t_\t_\n"
      "2\tBye\tbye\tINTJ\tUH\t_\t1\tdep\t_\t_\n");
  EvalReport r = evaluate(g, s);
  CHECK_EQ(r.sentences, 0.0);
  CHECK_EQ(r.tokens, 1.0);
  CHECK_EQ(r.words, 1.0);
  CHECK(close(r.uas, 0.5));
  CHECK(close(r.las, 0.5));
  CHECK_EQ(r.alltags, 1.0);
}

TEST_CASE("scorer: mwt words align by LCS of forms") {
  conllu::Document g = doc(
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\tVB\t_\t3\taux\t_\t_\n"
      "2\tnot\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n"
      "3\tstop\tstop\tVERB\tVB\t_\t0\troot\t_\t_\n");
  conllu::Document s = doc(
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\tVB\t_\t3\taux\t_\t_\n"
      "2\tn't\tnot\tPART\tRB\t_\t3\tadvmod\t_\t_\n"
      "3\tstop\tstop\tVERB\tVB\t_\t0\troot\t_\t_\n");
  Alignment a = align(g, s);
  REQUIRE_EQ(a.pairs.size(), 2);
  CHECK_EQ(a.gold[a.pairs[0].gold].form, "do");
  CHECK_EQ(a.gold[a.pairs[1].gold].form, "stop");

  EvalReport r = evaluate(g, s);
  CHECK_EQ(r.tokens, 1.0);
  CHECK(close(r.words, 2.0 / 3.0));
  CHECK(close(r.upos, 2.0 / 3.0));
  CHECK(close(r.uas, 2.0 / 3.0));
  CHECK(close(r.las, 2.0 / 3.0));
  CHECK(close(r.lemmas, 2.0 / 3.0));
}

TEST_CASE("scorer: label error halves LAS but not UAS") {
  conllu::Document g = doc(
      "1\tcats\tcat\tNOUN\tNNS\tNumber=Plur\t2\tnsubj\t_\t_\n"
      "2\tsleep\tsleep\tVERB\tVBP\tNumber=Plur\t0\troot\t_\t_\n");
  conllu::Document s = doc(
      "1\tcats\tcat\tNOUN\tNNS\tNumber=Plur\t2\tobj\t_\t_\n"
      "2\tsleep\tsleep\tVERB\tVBP\tNumber=Plur\t0\troot\t_\t_\n");
  EvalReport r = evaluate(g, s);
  CHECK_EQ(r.uas, 1.0);
  CHECK(close(r.las, 0.5));
  CHECK(close(r.clas, 0.5));
  CHECK_EQ(r.alltags, 1.0);

  // Language-specific subtypes are ignored.
  conllu::Document s2 = doc(
      "1\tcats\tcat\tNOUN\tNNS\tNumber=Plur\t2\tnsubj:pass\t_\t_\n"
      "2\tsleep\tsleep\tVERB\tVBP\tNumber=Plur\t0\troot\t_\t_\n");
  CHECK_EQ(evaluate(g, s2).las, 1.0);
}

TEST_CASE("scorer: content metrics skip functional words") {
  conllu::Document g = doc(
      "1\tthe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n"
      "2\tcat\tcat\tNOUN\tNN\tNumber=Sing\t3\tnsubj\t_\t_\n"
      "3\tsleeps\tsleep\tVERB\tVBZ\tNumber=Sing\t0\troot\t_\t_\n");
  conllu::Document s = doc(
      "1\tthe\tthe\tX\tDT\t_\t3\tdet\t_\t_\n"
      "2\tcat\tcat\tNOUN\tNN\tNumber=Plur\t3\tnsubj\t_\t_\n"
      "3\tsleeps\tsleeps\tVERB\tVBZ\tNumber=Sing\t0\troot\t_\t_\n");
  EvalReport r = evaluate(g, s);
  CHECK(close(r.upos, 2.0 / 3.0));
  CHECK(close(r.ufeats, 2.0 / 3.0));
  CHECK(close(r.lemmas, 2.0 / 3.0));
  CHECK(close(r.uas, 2.0 / 3.0));
  CHECK(close(r.las, 2.0 / 3.0));
  CHECK_EQ(r.clas, 1.0);
  CHECK(close(r.mlas, 0.5));
  CHECK(close(r.blex, 0.5));
  CHECK(close(r.alltags, 1.0 / 3.0));
  CHECK(close(r.pmi, std::log(0.75)));
}

TEST_CASE("scorer: head correctness follows the alignment") {
  conllu::Document g = doc(
      "1\ta\ta\tX\tx\t_\t3\tdep\t_\t_\n"
      "2\tb\tb\tX\tx\t_\t3\tdep\t_\t_\n"
      "3\tcc\tcc\tX\tx\t_\t0\troot\t_\t_\n");
  conllu::Document s = doc(
      "1\ta\ta\tX\tx\t_\t2\tdep\t_\t_\n"
      "2\tb\tb\tX\tx\t_\t3\tdep\t_\t_\n"
      "3\tc\tc\tX\tx\t_\t0\troot\t_\t_\n"
      "4\tc\tc\tX\tx\t_\t3\tdep\t_\t_\n");
  Alignment a = align(g, s);
  CHECK_EQ(a.pairs.size(), 2);
  EvalReport r = evaluate(g, s);
  // Both aligned words point at heads whose alignment does not correspond.
  CHECK_EQ(r.uas, 0.0);
  CHECK(close(r.words, 4.0 / 7.0));
}

TEST_CASE("scorer: feats comparison is order-insensitive and tokens default to words") {
  conllu::Document g, s;
  conllu::Sentence gs, ss;
  gs.words.push_back(mk(1, "run", "run", "VERB", "V", "Number=Sing|Tense=Pres", 0, "root"));
  ss.words.push_back(mk(1, "run", "run", "VERB", "V", "Tense=Pres|Number=Sing", 0, "root"));
  g.sentences.push_back(gs);
  s.sentences.push_back(ss);
  EvalReport r = evaluate(g, s);
  CHECK_EQ(r.ufeats, 1.0);
  CHECK_EQ(r.alltags, 1.0);
  CHECK_EQ(r.tokens, 1.0);
}

TEST_CASE("scorer: pmi arithmetic") {
  EvalReport r;
  r.upos_acc = 0.9;
  r.xpos_acc = 0.9;
  r.ufeats_acc = 0.9;
  r.alltags_acc = 0.81;
  CHECK(std::abs(compute_pmi(r) - std::log(0.81 / 0.729)) < 1e-9);
  CHECK(std::abs(compute_pmi(r) - 0.10536051565782628) < 1e-9);

  r.upos_acc = 0.8;
  r.xpos_acc = 0.5;
  r.ufeats_acc = 0.25;
  r.alltags_acc = 0.1;
  CHECK(close(compute_pmi(r), 0.0));

  r.upos_acc = r.xpos_acc = r.ufeats_acc = r.alltags_acc = 1.0;
  CHECK_EQ(compute_pmi(r), 0.0);

  r.upos_acc = 0.0;
  CHECK(std::isnan(compute_pmi(r)));
}

TEST_CASE("scorer: pmi is zero under constructed independence") {
  // Eight words; the three error kinds follow the bits of the word index, so
  // each accuracy is 1/2 and AllTags is exactly their product.
  conllu::Document g, s;
  conllu::Sentence gs, ss;
  for (int i = 0; i < 8; ++i) {
    std::string form = "w" + std::to_string(i);
    gs.words.push_back(mk(i + 1, form, "l", "N", "x", "F=1", 0, "dep"));
    conllu::Word w = mk(i + 1, form, "l", (i & 1) ? "V" : "N", (i & 2) ? "y" : "x",
                        (i & 4) ? "F=2" : "F=1", 0, "dep");
    ss.words.push_back(w);
  }
  g.sentences.push_back(gs);
  s.sentences.push_back(ss);
  EvalReport r = evaluate(g, s);
  CHECK_EQ(r.upos_acc, 0.5);
  CHECK_EQ(r.xpos_acc, 0.5);
  CHECK_EQ(r.ufeats_acc, 0.5);
  CHECK_EQ(r.alltags_acc, 0.125);
  CHECK_EQ(r.pmi, 0.0);

  // All-wrong tags leave PMI undefined but the F1 fields in range.
  conllu::Document s2 = s;
  for (auto& w : s2.sentences[0].words) w.upos = "Z";
  EvalReport r2 = evaluate(g, s2);
  CHECK_EQ(r2.upos_acc, 0.0);
  CHECK(std::isnan(r2.pmi));
  for (double f : f1_fields(r2)) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("scorer: macro average is the per-metric mean") {
  EvalReport a, b;
  a.las = 0.8;
  b.las = 0.6;
  a.tokens = 1.0;
  b.tokens = 0.5;
  a.pmi = 0.2;
  b.pmi = 0.0;
  EvalReport m = macro_average({a, b});
  CHECK(close(m.las, 0.7));
  CHECK(close(m.tokens, 0.75));
  CHECK(close(m.pmi, 0.1));

  EvalReport one = macro_average({a});
  CHECK_EQ(one.las, a.las);
  CHECK_EQ(one.tokens, a.tokens);

  EvalReport k = macro_average({a, a, a});
  CHECK(close(k.las, a.las));

  CHECK_THROWS_AS(macro_average({}), std::invalid_argument);
}

TEST_CASE("scorer: mismatched character streams are an error") {
  conllu::Document g = doc("1\tabc\t_\tX\tx\t_\t0\troot\t_\t_\n");
  conllu::Document s = doc("1\tabd\t_\tX\tx\t_\t0\troot\t_\t_\n");
  CHECK_THROWS_AS(align(g, s), DataError);

  conllu::Document g2 = doc(kSplitGold);
  conllu::Document s2 = doc(kSplitSystem);
  CHECK_NOTHROW(align(g2, s2, "do   n't \n stop"));
  CHECK_THROWS_AS(align(g2, s2, "do not stop"), DataError);
}

TEST_CASE("scorer: f1 is symmetric in gold and system") {
  std::mt19937 rng(7);
  for (int t = 0; t < 200; ++t) {
    long g = static_cast<long>(rng() % 20);
    long s = static_cast<long>(rng() % 20);
    long c = (g == 0 || s == 0) ? 0 : static_cast<long>(rng() % (std::min(g, s) + 1));
    CHECK_EQ(f1_score(c, g, s), f1_score(c, s, g));
  }
  CHECK_EQ(f1_score(0, 0, 0), 1.0);
  CHECK_EQ(f1_score(0, 0, 3), 0.0);
  CHECK_EQ(f1_score(0, 3, 0), 0.0);
}

TEST_CASE("scorer: evaluation is symmetric when segmentation agrees") {
  std::mt19937 rng(11);
  for (int t = 0; t < 30; ++t) {
    Shape sh = random_shape(rng, false);
    conllu::Document a = annotate(sh, rng);
    conllu::Document b = annotate(sh, rng);
    EvalReport fwd = evaluate(a, b);
    EvalReport rev = evaluate(b, a);
    std::vector<double> x = f1_fields(fwd), y = f1_fields(rev);
    for (size_t i = 0; i < x.size(); ++i) CHECK_EQ(x[i], y[i]);
    if (std::isnan(fwd.pmi)) {
      CHECK(std::isnan(rev.pmi));
    } else {
      CHECK(close(fwd.pmi, rev.pmi));
    }
  }
}

TEST_CASE("scorer: self-evaluation is perfect and alltags is dominated") {
  std::mt19937 rng(13);
  for (int t = 0; t < 30; ++t) {
    Shape sh = random_shape(rng, true);
    conllu::Document d = annotate(sh, rng);
    EvalReport self = evaluate(d, d);
    for (double f : f1_fields(self)) CHECK_EQ(f, 1.0);

    conllu::Document other = annotate(sh, rng);
    EvalReport r = evaluate(d, other);
    CHECK(r.alltags <= r.upos + 1e-12);
    CHECK(r.alltags <= r.xpos + 1e-12);
    CHECK(r.alltags <= r.ufeats + 1e-12);
    for (double f : f1_fields(r)) {
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
    }

    // Pairs form a partial bijection, increasing in both coordinates.
    Alignment al = align(d, other);
    for (size_t i = 1; i < al.pairs.size(); ++i) {
      CHECK(al.pairs[i].gold > al.pairs[i - 1].gold);
      CHECK(al.pairs[i].system > al.pairs[i - 1].system);
    }
    for (const auto& p : al.pairs) {
      CHECK_EQ(al.gold_to_system[p.gold], p.system);
      CHECK_EQ(al.system_to_gold[p.system], p.gold);
    }
  }
}

TEST_CASE("scorer: content relation membership") {
  for (const char* rel : {"nsubj", "obj", "root", "dep", "conj", "flat", "goeswith"})
    CHECK(is_content_relation(rel));
  CHECK(is_content_relation("nsubj:pass"));
  CHECK(is_content_relation("obl:arg"));
  for (const char* rel : {"det", "aux", "case", "mark", "cc", "cop", "punct", "clf", "_", ""})
    CHECK_FALSE(is_content_relation(rel));
}

TEST_CASE("scorer: report rendering") {
  EvalReport r;
  r.las = 0.5;
  r.pmi = 0.0514;
  std::string table = format_report(r);
  CHECK(table.find("LAS        | 0.5000") != std::string::npos);
  CHECK(table.find("PMI        | +0.0514") != std::string::npos);
  std::string kv = report_keyvalues(r);
  CHECK(kv.find("LAS=0.500000\n") != std::string::npos);
  CHECK(kv.find("PMI=0.051400\n") != std::string::npos);

  r.pmi = std::numeric_limits<double>::quiet_NaN();
  CHECK(format_report(r).find("PMI        | undefined") != std::string::npos);
  CHECK(report_keyvalues(r).find("PMI=undefined\n") != std::string::npos);

  int lines = 0;
  for (char c : table)
    if (c == '\n') ++lines;
  CHECK_EQ(lines, 16);
}
