#include "udkit/scorer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "udkit/error.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

namespace {

using Span = std::pair<long, long>;

const std::array<std::string, 29> kContentRelations = {
    "nsubj",      "obj",      "iobj",      "csubj",    "ccomp",   "xcomp",
    "obl",        "vocative", "expl",      "dislocated", "advcl", "advmod",
    "discourse",  "nmod",     "appos",     "nummod",   "acl",     "amod",
    "conj",       "fixed",    "flat",      "compound", "list",    "parataxis",
    "orphan",     "goeswith", "reparandum", "root",    "dep"};

std::vector<char32_t> strip_ws(const std::string& s) {
  std::vector<char32_t> out;
  for (char32_t cp : utf8::decode(s))
    if (!utf8::is_space(cp)) out.push_back(cp);
  return out;
}

std::string strip_subtype(const std::string& deprel) {
  return deprel.substr(0, deprel.find(':'));
}

struct FlatDoc {
  std::vector<ScoredWord> words;
  std::vector<Span> tokens;
  std::vector<Span> sentences;
  std::vector<char32_t> chars;
};

// Flattens a document into scoring units. Character spans come from the
// surface token forms (the range line's form for multi-word tokens), with all
// whitespace discarded. Documents without token bookkeeping fall back to one
// token per word.
FlatDoc flatten(const conllu::Document& doc) {
  FlatDoc f;
  for (const auto& sent : doc.sentences) {
    if (sent.words.empty()) continue;
    long base = static_cast<long>(f.words.size());
    long sent_start = static_cast<long>(f.chars.size());
    int n = static_cast<int>(sent.words.size());
    for (const auto& w : sent.words) {
      ScoredWord sw;
      sw.form = w.form;
      sw.lemma = w.lemma;
      sw.upos = w.upos;
      sw.xpos = w.xpos;
      sw.feats = conllu::canonical_feats(w.ufeats);
      sw.deprel = strip_subtype(w.deprel);
      sw.content = is_content_relation(sw.deprel);
      if (w.head == 0)
        sw.parent = -1;
      else if (w.head >= 1 && w.head <= n)
        sw.parent = static_cast<int>(base) + w.head - 1;
      else
        sw.parent = -2;
      f.words.push_back(std::move(sw));
    }
    auto add_token = [&](const std::string& form, int sid, int eid, bool range) {
      if (sid < 1 || eid > n || sid > eid)
        throw DataError("token span outside its sentence");
      std::vector<char32_t> cs = strip_ws(form);
      long a = static_cast<long>(f.chars.size());
      f.chars.insert(f.chars.end(), cs.begin(), cs.end());
      long b = static_cast<long>(f.chars.size());
      f.tokens.emplace_back(a, b);
      for (int id = sid; id <= eid; ++id) {
        ScoredWord& sw = f.words[static_cast<size_t>(base + id - 1)];
        sw.start = a;
        sw.end = b;
        sw.in_mwt = range;
      }
    };
    if (!sent.tokens.empty()) {
      for (const auto& t : sent.tokens) add_token(t.form, t.start_id, t.end_id, t.is_range());
    } else {
      for (const auto& w : sent.words) add_token(w.form, w.id, w.id, false);
    }
    f.sentences.emplace_back(sent_start, static_cast<long>(f.chars.size()));
  }
  return f;
}

// Both lists are increasing; counts exact (start, end) matches.
long span_matches(const std::vector<Span>& a, const std::vector<Span>& b) {
  long matched = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++matched;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return matched;
}

// Words covered by multi-word tokens have spans that need not partition the
// character stream the same way on both sides, so the shared-task rule aligns
// them inside a closed region: starting from the current pair, every word
// that begins before the region's end joins it, and each joining range-token
// word may push the end further out.
void multiword_region(const std::vector<ScoredWord>& g, const std::vector<ScoredWord>& s,
                      size_t& gi, size_t& si, long& end) {
  auto beyond = [end0 = &end](const std::vector<ScoredWord>& w, size_t i) {
    if (i >= w.size()) return true;
    if (w[i].in_mwt) return w[i].start >= *end0;
    return w[i].end > *end0;
  };
  auto extend = [&end](const ScoredWord& w) {
    if (w.in_mwt && w.end > end) end = w.end;
  };
  end = 0;
  if (g[gi].in_mwt) extend(g[gi]);
  if (s[si].in_mwt) extend(s[si]);
  while (!beyond(g, gi) || !beyond(s, si)) {
    if (gi < g.size() && (si >= s.size() || g[gi].start <= s[si].start)) {
      extend(g[gi]);
      ++gi;
    } else {
      extend(s[si]);
      ++si;
    }
  }
}

void align_words(Alignment& a) {
  const std::vector<ScoredWord>& g = a.gold;
  const std::vector<ScoredWord>& s = a.system;
  size_t gi = 0, si = 0;
  while (gi < g.size() && si < s.size()) {
    if (g[gi].in_mwt || s[si].in_mwt) {
      size_t gs = gi, ss = si;
      long end = 0;
      multiword_region(g, s, gi, si, end);
      if (gi == gs && si == ss) {
        // Empty-span range token; nothing joined the region.
        if (g[gi].in_mwt) ++gi; else ++si;
        continue;
      }
      size_t gn = gi - gs, sn = si - ss;
      if (gn == 0 || sn == 0) continue;
      std::vector<std::string> gl(gn), sl(sn);
      for (size_t k = 0; k < gn; ++k) gl[k] = utf8::to_lower(g[gs + k].form);
      for (size_t k = 0; k < sn; ++k) sl[k] = utf8::to_lower(s[ss + k].form);
      // Suffix LCS table; matching forms always align.
      std::vector<std::vector<int>> lcs(gn + 1, std::vector<int>(sn + 1, 0));
      for (size_t x = gn; x-- > 0;) {
        for (size_t y = sn; y-- > 0;) {
          int best = std::max(lcs[x + 1][y], lcs[x][y + 1]);
          if (gl[x] == sl[y]) best = std::max(best, 1 + lcs[x + 1][y + 1]);
          lcs[x][y] = best;
        }
      }
      size_t x = 0, y = 0;
      while (x < gn && y < sn) {
        if (gl[x] == sl[y]) {
          a.pairs.push_back({static_cast<int>(gs + x), static_cast<int>(ss + y)});
          ++x;
          ++y;
        } else if (lcs[x + 1][y] >= lcs[x][y + 1]) {
          ++x;
        } else {
          ++y;
        }
      }
    } else if (g[gi].start == s[si].start && g[gi].end == s[si].end) {
      a.pairs.push_back({static_cast<int>(gi), static_cast<int>(si)});
      ++gi;
      ++si;
    } else if (g[gi].start <= s[si].start) {
      ++gi;
    } else {
      ++si;
    }
  }
}

bool head_aligned(const Alignment& a, const ScoredWord& g, const ScoredWord& s) {
  if (g.parent == -1 || s.parent == -1) return g.parent == -1 && s.parent == -1;
  if (g.parent < 0 || s.parent < 0) return false;
  return a.system_to_gold[static_cast<size_t>(s.parent)] == g.parent;
}

bool pair_correct(const Alignment& a, const ScoredWord& g, const ScoredWord& s, Metric m) {
  switch (m) {
    case Metric::kWords:
      return true;
    case Metric::kLemmas:
      return g.lemma == s.lemma;
    case Metric::kUpos:
      return g.upos == s.upos;
    case Metric::kXpos:
      return g.xpos == s.xpos;
    case Metric::kUfeats:
      return g.feats == s.feats;
    case Metric::kAllTags:
      return g.upos == s.upos && g.xpos == s.xpos && g.feats == s.feats;
    case Metric::kUas:
      return head_aligned(a, g, s);
    case Metric::kLas:
    case Metric::kClas:
      return head_aligned(a, g, s) && g.deprel == s.deprel;
    case Metric::kMlas:
      return head_aligned(a, g, s) && g.deprel == s.deprel && g.upos == s.upos &&
             g.feats == s.feats;
    case Metric::kBlex:
      return head_aligned(a, g, s) && g.deprel == s.deprel && g.lemma == s.lemma;
    default:
      throw std::invalid_argument("span metric passed to a word-level path");
  }
}

}  // namespace

bool is_content_relation(const std::string& deprel) {
  const std::string base = strip_subtype(deprel);
  return std::find(kContentRelations.begin(), kContentRelations.end(), base) !=
         kContentRelations.end();
}

Alignment align(const conllu::Document& gold, const conllu::Document& system,
                const std::string& raw) {
  FlatDoc g = flatten(gold);
  FlatDoc s = flatten(system);
  if (g.chars != s.chars)
    throw DataError("gold and system documents spell different character streams");
  if (!raw.empty() && strip_ws(raw) != g.chars)
    throw DataError("raw text does not match the documents' character stream");

  Alignment a;
  a.tokens_gold = static_cast<long>(g.tokens.size());
  a.tokens_system = static_cast<long>(s.tokens.size());
  a.tokens_correct = span_matches(g.tokens, s.tokens);
  a.sentences_gold = static_cast<long>(g.sentences.size());
  a.sentences_system = static_cast<long>(s.sentences.size());
  a.sentences_correct = span_matches(g.sentences, s.sentences);
  a.gold = std::move(g.words);
  a.system = std::move(s.words);
  align_words(a);
  a.gold_to_system.assign(a.gold.size(), -1);
  a.system_to_gold.assign(a.system.size(), -1);
  for (const AlignedWordPair& p : a.pairs) {
    a.gold_to_system[static_cast<size_t>(p.gold)] = p.system;
    a.system_to_gold[static_cast<size_t>(p.system)] = p.gold;
  }
  return a;
}

double f1_score(long correct, long gold_total, long system_total) {
  if (gold_total == 0 && system_total == 0) return 1.0;
  if (correct == 0) return 0.0;
  return 2.0 * static_cast<double>(correct) / static_cast<double>(gold_total + system_total);
}

double compute_f1(const Alignment& a, Metric m) {
  if (m == Metric::kTokens)
    return f1_score(a.tokens_correct, a.tokens_gold, a.tokens_system);
  if (m == Metric::kSentences)
    return f1_score(a.sentences_correct, a.sentences_gold, a.sentences_system);

  bool content_only = m == Metric::kClas || m == Metric::kMlas || m == Metric::kBlex;
  long gold_total, system_total;
  if (content_only) {
    auto count = [](const std::vector<ScoredWord>& ws) {
      return static_cast<long>(std::count_if(ws.begin(), ws.end(),
                                             [](const ScoredWord& w) { return w.content; }));
    };
    gold_total = count(a.gold);
    system_total = count(a.system);
  } else {
    gold_total = static_cast<long>(a.gold.size());
    system_total = static_cast<long>(a.system.size());
  }
  long correct = 0;
  for (const AlignedWordPair& p : a.pairs) {
    const ScoredWord& g = a.gold[static_cast<size_t>(p.gold)];
    const ScoredWord& s = a.system[static_cast<size_t>(p.system)];
    if (content_only && !g.content) continue;
    if (pair_correct(a, g, s, m)) ++correct;
  }
  return f1_score(correct, gold_total, system_total);
}

double compute_pmi(const EvalReport& r) {
  if (r.upos_acc <= 0 || r.xpos_acc <= 0 || r.ufeats_acc <= 0 || r.alltags_acc <= 0)
    return std::numeric_limits<double>::quiet_NaN();
  return std::log(r.alltags_acc / (r.upos_acc * r.xpos_acc * r.ufeats_acc));
}

EvalReport evaluate(const conllu::Document& gold, const conllu::Document& system,
                    const std::string& raw) {
  Alignment a = align(gold, system, raw);
  EvalReport r;
  r.tokens = compute_f1(a, Metric::kTokens);
  r.sentences = compute_f1(a, Metric::kSentences);
  r.words = compute_f1(a, Metric::kWords);
  r.lemmas = compute_f1(a, Metric::kLemmas);
  r.upos = compute_f1(a, Metric::kUpos);
  r.xpos = compute_f1(a, Metric::kXpos);
  r.ufeats = compute_f1(a, Metric::kUfeats);
  r.alltags = compute_f1(a, Metric::kAllTags);
  r.uas = compute_f1(a, Metric::kUas);
  r.las = compute_f1(a, Metric::kLas);
  r.clas = compute_f1(a, Metric::kClas);
  r.mlas = compute_f1(a, Metric::kMlas);
  r.blex = compute_f1(a, Metric::kBlex);

  long cu = 0, cx = 0, cf = 0, ca = 0;
  for (const AlignedWordPair& p : a.pairs) {
    const ScoredWord& g = a.gold[static_cast<size_t>(p.gold)];
    const ScoredWord& s = a.system[static_cast<size_t>(p.system)];
    bool u = g.upos == s.upos, x = g.xpos == s.xpos, f = g.feats == s.feats;
    cu += u;
    cx += x;
    cf += f;
    ca += u && x && f;
  }
  if (!a.pairs.empty()) {
    double n = static_cast<double>(a.pairs.size());
    r.upos_acc = cu / n;
    r.xpos_acc = cx / n;
    r.ufeats_acc = cf / n;
    r.alltags_acc = ca / n;
  }
  r.pmi = compute_pmi(r);
  return r;
}

namespace {

constexpr double EvalReport::* kReportFields[] = {
    &EvalReport::tokens,   &EvalReport::sentences, &EvalReport::words,
    &EvalReport::lemmas,   &EvalReport::upos,      &EvalReport::xpos,
    &EvalReport::ufeats,   &EvalReport::alltags,   &EvalReport::uas,
    &EvalReport::las,      &EvalReport::clas,      &EvalReport::mlas,
    &EvalReport::blex,     &EvalReport::upos_acc,  &EvalReport::xpos_acc,
    &EvalReport::ufeats_acc, &EvalReport::alltags_acc, &EvalReport::pmi};

const char* const kMetricNames[] = {"Tokens", "Sentences", "Words",   "Lemmas",
                                    "UPOS",   "XPOS",      "UFeats",  "AllTags",
                                    "UAS",    "LAS",       "CLAS",    "MLAS",
                                    "BLEX"};

}  // namespace

EvalReport macro_average(const std::vector<EvalReport>& reports) {
  if (reports.empty())
    throw std::invalid_argument("macro_average needs at least one report");
  EvalReport out;
  for (double EvalReport::* field : kReportFields) {
    double sum = 0;
    for (const EvalReport& r : reports) sum += r.*field;
    out.*field = sum / static_cast<double>(reports.size());
  }
  return out;
}

std::string format_report(const EvalReport& r) {
  std::string out = "Metric     |     F1\n-----------+-------\n";
  char line[64];
  for (int i = 0; i < 13; ++i) {
    std::snprintf(line, sizeof line, "%-10s | %6.4f\n", kMetricNames[i],
                  r.*kReportFields[i]);
    out += line;
  }
  if (std::isnan(r.pmi)) {
    out += "PMI        | undefined\n";
  } else {
    std::snprintf(line, sizeof line, "%-10s | %+6.4f\n", "PMI", r.pmi);
    out += line;
  }
  return out;
}

std::string report_keyvalues(const EvalReport& r) {
  std::string out;
  char line[64];
  for (int i = 0; i < 13; ++i) {
    std::snprintf(line, sizeof line, "%s=%.6f\n", kMetricNames[i], r.*kReportFields[i]);
    out += line;
  }
  if (std::isnan(r.pmi)) {
    out += "PMI=undefined\n";
  } else {
    std::snprintf(line, sizeof line, "PMI=%.6f\n", r.pmi);
    out += line;
  }
  return out;
}

}  // namespace udkit
