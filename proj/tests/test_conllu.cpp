#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "udkit/conllu.hpp"
#include "udkit/error.hpp"

using namespace udkit;
using namespace udkit::conllu;

namespace {

const char* kSimple =
    "# sent_id = 1\n"
    "# text = Der Mann lacht.\n"
    "1\tDer\tder\tDET\t_\tCase=Nom|Gender=Masc\t2\tdet\t_\t_\n"
    "2\tMann\tMann\tNOUN\t_\tGender=Masc\t3\tnsubj\t_\t_\n"
    "3\tlacht\tlachen\tVERB\t_\t_\t0\troot\t_\tSpaceAfter=No\n"
    "4\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
    "\n";

const char* kMwt =
    "# text = Im Haus\n"
    "1-2\tIm\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "1\tin\tin\tADP\t_\t_\t3\tcase\t_\t_\n"
    "2\tdem\tder\tDET\t_\t_\t3\tdet\t_\t_\n"
    "3\tHaus\tHaus\tNOUN\t_\t_\t0\troot\t_\t_\n"
    "\n";

}  // namespace

TEST_CASE("feats parsing, sorting, and duplicates") {
  auto kv = parse_feats("Number=Sing|Case=Nom|Case=Acc");
  REQUIRE(kv.size() == 2);  // duplicate key keeps the first value
  CHECK(kv[0].first == "Case");
  CHECK(kv[0].second == "Nom");
  CHECK(kv[1].first == "Number");
  CHECK(kv[1].second == "Sing");
  CHECK(parse_feats("_").empty());
  CHECK(parse_feats("").empty());
  CHECK(canonical_feats("Number=Sing|Case=Nom") == "Case=Nom|Number=Sing");
  CHECK(format_feats({}) == "_");
}

TEST_CASE("misc item helpers") {
  CHECK(misc_add("", "SpaceAfter=No") == "SpaceAfter=No");
  CHECK(misc_add("A=1", "B=2") == "A=1|B=2");
  CHECK(misc_has("A=1|SpaceAfter=No", "SpaceAfter=No"));
  CHECK(!misc_has("A=1", "SpaceAfter=No"));
  CHECK(misc_remove("A=1|SpaceAfter=No|B=2", "SpaceAfter=No") == "A=1|B=2");
  CHECK(misc_remove("SpaceAfter=No", "SpaceAfter=No") == "");
}

TEST_CASE("read a plain sentence") {
  Document doc = read_string(kSimple);
  REQUIRE(doc.sentences.size() == 1);
  const Sentence& s = doc.sentences[0];
  REQUIRE(s.words.size() == 4);
  CHECK(s.text == "Der Mann lacht.");
  CHECK(s.comments.size() == 2);
  CHECK(s.word(1).form == "Der");
  CHECK(s.word(1).ufeats == "Case=Nom|Gender=Masc");
  CHECK(s.word(3).head == 0);
  CHECK(s.word(3).deprel == "root");
  CHECK(s.word(3).misc == "SpaceAfter=No");
  CHECK(s.word(4).upos == "PUNCT");
  // One single-word token per word.
  REQUIRE(s.tokens.size() == 4);
  CHECK(s.tokens[0].start_id == 1);
  CHECK(s.tokens[0].end_id == 1);
  CHECK(!s.tokens[0].mwt);
  CHECK(doc.word_count() == 4);
}

TEST_CASE("feats are canonicalized on read") {
  Document doc = read_string(
      "1\tx\t_\t_\t_\tNumber=Sing|Case=Nom\t0\troot\t_\t_\n\n");
  CHECK(doc.sentences[0].word(1).ufeats == "Case=Nom|Number=Sing");
}

TEST_CASE("multiword token spans") {
  Document doc = read_string(kMwt);
  const Sentence& s = doc.sentences[0];
  REQUIRE(s.words.size() == 3);
  REQUIRE(s.tokens.size() == 2);
  CHECK(s.tokens[0].form == "Im");
  CHECK(s.tokens[0].is_range());
  CHECK(s.tokens[0].mwt);
  CHECK(s.tokens[0].start_id == 1);
  CHECK(s.tokens[0].end_id == 2);
  CHECK(s.tokens[1].form == "Haus");
  CHECK(!s.tokens[1].mwt);
}

TEST_CASE("pending expansion round trips through MISC") {
  // A single-span token flagged for expansion serializes as MWT=Yes and
  // comes back flagged.
  Document doc;
  Sentence s;
  Word w;
  w.id = 1;
  w.form = "du";
  s.words.push_back(w);
  Token t;
  t.start_id = t.end_id = 1;
  t.form = "du";
  t.mwt = true;
  s.tokens.push_back(t);
  doc.sentences.push_back(s);

  std::string text = write_string(doc);
  CHECK(text.find("MWT=Yes") != std::string::npos);
  Document back = read_string(text);
  REQUIRE(back.sentences[0].tokens.size() == 1);
  CHECK(back.sentences[0].tokens[0].mwt);
  CHECK(back.sentences[0].word(1).misc == "");  // flag stripped from the word
}

TEST_CASE("write then read is identity") {
  Document doc = read_string(std::string(kSimple) + kMwt);
  std::string text = write_string(doc);
  Document back = read_string(text);
  CHECK(doc == back);
}

TEST_CASE("write emits text comment only when missing") {
  Document doc = read_string(kSimple);
  std::string text = write_string(doc);
  CHECK(text.find("# text = Der Mann lacht.") != std::string::npos);
  size_t first = text.find("# text");
  CHECK(text.find("# text", first + 1) == std::string::npos);

  Document doc2;
  Sentence s;
  Word w;
  w.id = 1;
  w.form = "Hi";
  s.words.push_back(w);
  Token t;
  t.start_id = t.end_id = 1;
  t.form = "Hi";
  s.tokens.push_back(t);
  s.text = "Hi";
  doc2.sentences.push_back(s);
  std::string text2 = write_string(doc2);
  CHECK(text2.find("# text = Hi\n") != std::string::npos);
}

TEST_CASE("reader reports malformed input with line numbers") {
  // Wrong column count.
  CHECK_THROWS_AS(read_string("1\tfoo\tbar\n\n"), DataError);
  // Non-integer id.
  CHECK_THROWS_AS(read_string("x\tfoo\t_\t_\t_\t_\t_\t_\t_\t_\n\n"), DataError);
  // Gap in ids.
  CHECK_THROWS_AS(
      read_string("1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n"
                  "3\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"),
      DataError);
  // Range not covering following words.
  CHECK_THROWS_AS(
      read_string("1-3\tab\t_\t_\t_\t_\t_\t_\t_\t_\n"
                  "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n"
                  "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"),
      DataError);
  // Overlapping ranges.
  CHECK_THROWS_AS(
      read_string("1-2\tab\t_\t_\t_\t_\t_\t_\t_\t_\n"
                  "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n"
                  "2-3\tbc\t_\t_\t_\t_\t_\t_\t_\t_\n"
                  "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n"
                  "3\tc\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"),
      DataError);
  try {
    read_string("1\tfoo\tbar\n\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("tree validity") {
  CHECK(is_valid_tree({0}));
  CHECK(is_valid_tree({2, 0, 2}));
  CHECK(!is_valid_tree({0, 0}));     // two roots
  CHECK(!is_valid_tree({2, 1}));     // cycle, no root
  CHECK(!is_valid_tree({3, 0, 1}));  // rootless cycle hanging off a root
  CHECK(is_valid_tree({3, 1, 0}));
  CHECK(!is_valid_tree({}));
}

TEST_CASE("strict validation") {
  Document doc = read_string(kSimple);
  validate(doc, true);

  // Unexpanded token flag fails strict but passes relaxed.
  Document pending = read_string(
      "1\tdu\t_\t_\t_\t_\t0\troot\t_\tMWT=Yes\n\n");
  validate(pending, false);
  CHECK_THROWS_AS(validate(pending, true), DataError);

  // Cyclic heads.
  Document cyc = read_string(
      "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n"
      "2\tb\t_\t_\t_\t_\t1\troot\t_\t_\n\n");
  CHECK_THROWS_AS(validate(cyc, true), DataError);

  // head == 0 must pair with deprel root.
  Document badroot = read_string(
      "1\ta\t_\t_\t_\t_\t0\tdep\t_\t_\n\n");
  CHECK_THROWS_AS(validate(badroot, true), DataError);

  // Subtype of root is accepted.
  Document roots = read_string(
      "1\ta\t_\t_\t_\t_\t0\troot:sub\t_\t_\n\n");
  validate(roots, true);
}

TEST_CASE("deterministic dev split") {
  Document doc;
  for (int i = 0; i < 17; ++i) {
    Sentence s;
    Word w;
    w.id = 1;
    w.form = "w" + std::to_string(i);
    s.words.push_back(w);
    Token t;
    t.start_id = t.end_id = 1;
    t.form = w.form;
    s.tokens.push_back(t);
    doc.sentences.push_back(s);
  }
  auto [train, dev] = train_dev_split(doc, 7);
  CHECK(train.sentences.size() == 15);
  CHECK(dev.sentences.size() == 2);
  // Every 8th sentence (0-based index 7, 15) goes to dev.
  CHECK(dev.sentences[0].words[0].form == "w7");
  CHECK(dev.sentences[1].words[0].form == "w15");
  CHECK(train.sentences[0].words[0].form == "w0");

  Document tiny;
  tiny.sentences.assign(7, doc.sentences[0]);
  CHECK_THROWS_AS(train_dev_split(tiny, 7), DataError);
}

TEST_CASE("reading from a stream handles crlf and missing trailing blank") {
  std::istringstream in(
      "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\r\n"
      "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\r\n");
  Document doc = read(in);
  REQUIRE(doc.sentences.size() == 1);
  CHECK(doc.sentences[0].words.size() == 2);
  CHECK(doc.sentences[0].word(2).form == "b");
}
