#pragma once

#include <string>
#include <vector>

#include "udkit/conllu.hpp"

namespace udkit {

// One word prepared for scoring. Spans are codepoint offsets into the
// document's whitespace-stripped character stream; `parent` is a flat word
// index across the whole document (-1 for root, -2 when the head is unset or
// out of range). `deprel` has its language-specific subtype stripped and
// `feats` is in canonical sorted form, matching shared-task comparison rules.
struct ScoredWord {
  std::string form;
  std::string lemma;
  std::string upos;
  std::string xpos;
  std::string feats;
  std::string deprel;
  long start = 0;
  long end = 0;
  int parent = -2;
  bool in_mwt = false;   // covered by a multi-word range token
  bool content = false;  // deprel is a content relation
};

struct AlignedWordPair {
  int gold = 0;    // index into Alignment::gold
  int system = 0;  // index into Alignment::system
};

// Character-span alignment of a system document against gold. Word pairs form
// a partial bijection, increasing in both coordinates. Token and sentence
// match counts are kept directly; word-level metrics run over `pairs`.
struct Alignment {
  std::vector<ScoredWord> gold;
  std::vector<ScoredWord> system;
  std::vector<AlignedWordPair> pairs;
  std::vector<int> gold_to_system;  // -1 when unaligned
  std::vector<int> system_to_gold;
  long tokens_correct = 0, tokens_gold = 0, tokens_system = 0;
  long sentences_correct = 0, sentences_gold = 0, sentences_system = 0;
};

// Aligns by identical character spans; words under multi-word tokens align by
// longest common subsequence of lowercased forms within the covering span.
// Both documents must spell the same character stream once whitespace is
// discarded, and `raw`, when nonempty, must match that stream too.
Alignment align(const conllu::Document& gold, const conllu::Document& system,
                const std::string& raw = "");

enum class Metric {
  kTokens,
  kSentences,
  kWords,
  kLemmas,
  kUpos,
  kXpos,
  kUfeats,
  kAllTags,
  kUas,
  kLas,
  kClas,
  kMlas,
  kBlex,
};

// 2c/(g+s), with the empty-gold convention: 1 when both sides are empty.
double f1_score(long correct, long gold_total, long system_total);

double compute_f1(const Alignment& a, Metric m);

bool is_content_relation(const std::string& deprel);

struct EvalReport {
  double tokens = 0, sentences = 0, words = 0;
  double lemmas = 0, upos = 0, xpos = 0, ufeats = 0, alltags = 0;
  double uas = 0, las = 0, clas = 0, mlas = 0, blex = 0;
  // Aligned-word accuracies backing the PMI consistency measure.
  double upos_acc = 0, xpos_acc = 0, ufeats_acc = 0, alltags_acc = 0;
  double pmi = 0;  // NaN when any backing accuracy is zero
};

// ln(p(AllTags) / (p(UPOS) p(XPOS) p(UFeats))) over aligned-word accuracies;
// NaN when any accuracy is zero.
double compute_pmi(const EvalReport& r);

EvalReport evaluate(const conllu::Document& gold, const conllu::Document& system,
                    const std::string& raw = "");

// Unweighted per-metric mean. Requires at least one report.
EvalReport macro_average(const std::vector<EvalReport>& reports);

// Aligned-column table for humans; key=value lines for machines. An undefined
// PMI prints as "undefined" in both.
std::string format_report(const EvalReport& r);
std::string report_keyvalues(const EvalReport& r);

}  // namespace udkit
