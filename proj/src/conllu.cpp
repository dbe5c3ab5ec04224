#include "udkit/conllu.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "udkit/error.hpp"

namespace udkit::conllu {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void fail(size_t line_no, const std::string& msg) {
  throw DataError("conllu parse error at line " + std::to_string(line_no) + ": " + msg);
}

bool parse_int(const std::string& s, int* out) {
  if (s.empty()) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
    if (v > 100000000) return false;
  }
  *out = v;
  return true;
}

std::string undash(const std::string& col) { return col == "_" ? "" : col; }
std::string dash(const std::string& s) { return s.empty() ? "_" : s; }

void finish_sentence(Sentence& sent, std::vector<Token>& ranges, size_t line_no) {
  int n = static_cast<int>(sent.words.size());
  std::sort(ranges.begin(), ranges.end(),
            [](const Token& a, const Token& b) { return a.start_id < b.start_id; });
  int prev_end = 0;
  for (const Token& r : ranges) {
    if (r.start_id <= prev_end)
      fail(line_no, "overlapping MWT range " + std::to_string(r.start_id) + "-" +
                        std::to_string(r.end_id));
    if (r.end_id > n)
      fail(line_no, "MWT range " + std::to_string(r.start_id) + "-" +
                        std::to_string(r.end_id) + " exceeds sentence length");
    prev_end = r.end_id;
  }
  // Fill single-word tokens around the ranges.
  size_t ri = 0;
  for (int id = 1; id <= n; ++id) {
    if (ri < ranges.size() && ranges[ri].start_id == id) {
      sent.tokens.push_back(ranges[ri]);
      id = ranges[ri].end_id;
      ++ri;
      continue;
    }
    Word& w = sent.word(id);
    Token t;
    t.start_id = t.end_id = id;
    t.form = w.form;
    if (misc_has(w.misc, "MWT=Yes")) {
      t.mwt = true;
      w.misc = misc_remove(w.misc, "MWT=Yes");
    }
    sent.tokens.push_back(t);
  }
}

}  // namespace

size_t Document::word_count() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.words.size();
  return n;
}

std::vector<std::pair<std::string, std::string>> parse_feats(const std::string& s) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (s.empty() || s == "_") return kv;
  for (const std::string& item : split(s, '|')) {
    size_t eq = item.find('=');
    if (eq == std::string::npos) {
      kv.emplace_back(item, "");
    } else {
      kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
  }
  std::stable_sort(kv.begin(), kv.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  kv.erase(std::unique(kv.begin(), kv.end(),
                       [](const auto& a, const auto& b) { return a.first == b.first; }),
           kv.end());
  return kv;
}

std::string format_feats(std::vector<std::pair<std::string, std::string>> kv) {
  if (kv.empty()) return "_";
  std::stable_sort(kv.begin(), kv.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (size_t i = 0; i < kv.size(); ++i) {
    if (i) out += '|';
    out += kv[i].first;
    out += '=';
    out += kv[i].second;
  }
  return out;
}

std::string canonical_feats(const std::string& s) { return format_feats(parse_feats(s)); }

bool misc_has(const std::string& misc, const std::string& item) {
  if (misc.empty()) return false;
  for (const std::string& part : split(misc, '|'))
    if (part == item) return true;
  return false;
}

std::string misc_add(const std::string& misc, const std::string& item) {
  if (misc_has(misc, item)) return misc;
  if (misc.empty()) return item;
  return misc + "|" + item;
}

std::string misc_remove(const std::string& misc, const std::string& item) {
  if (misc.empty()) return misc;
  std::string out;
  for (const std::string& part : split(misc, '|')) {
    if (part == item) continue;
    if (!out.empty()) out += '|';
    out += part;
  }
  return out;
}

Document read(std::istream& in) {
  Document doc;
  Sentence sent;
  std::vector<Token> ranges;
  std::string line;
  size_t line_no = 0;
  int expected_id = 1;

  auto flush = [&](size_t at_line) {
    if (sent.words.empty() && sent.comments.empty()) return;
    if (sent.words.empty()) fail(at_line, "comments without words");
    finish_sentence(sent, ranges, at_line);
    doc.sentences.push_back(std::move(sent));
    sent = Sentence{};
    ranges.clear();
    expected_id = 1;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush(line_no);
      continue;
    }
    if (line[0] == '#') {
      sent.comments.push_back(line);
      std::string_view v(line);
      if (v.substr(0, 8) == "# text =") {
        sent.text = line.size() > 9 ? line.substr(9) : "";
      }
      continue;
    }
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 10)
      fail(line_no, "expected 10 columns, found " + std::to_string(cols.size()));

    size_t dash_pos = cols[0].find('-');
    if (dash_pos != std::string::npos) {
      Token t;
      if (!parse_int(cols[0].substr(0, dash_pos), &t.start_id) ||
          !parse_int(cols[0].substr(dash_pos + 1), &t.end_id))
        fail(line_no, "bad MWT range id '" + cols[0] + "'");
      if (t.end_id <= t.start_id) fail(line_no, "empty MWT range '" + cols[0] + "'");
      if (t.start_id != expected_id)
        fail(line_no, "MWT range '" + cols[0] + "' does not start at next word id");
      t.form = cols[1];
      t.mwt = true;
      t.misc = undash(cols[9]);
      ranges.push_back(t);
      continue;
    }

    Word w;
    if (!parse_int(cols[0], &w.id)) fail(line_no, "non-integer word id '" + cols[0] + "'");
    if (w.id != expected_id)
      fail(line_no, "word id " + std::to_string(w.id) + " breaks the 1..n sequence (expected " +
                        std::to_string(expected_id) + ")");
    ++expected_id;
    w.form = cols[1];
    w.lemma = undash(cols[2]);
    w.upos = cols[3];
    w.xpos = cols[4];
    w.ufeats = canonical_feats(cols[5]);
    if (cols[6] == "_") {
      w.head = -1;
    } else if (!parse_int(cols[6], &w.head)) {
      fail(line_no, "non-integer head '" + cols[6] + "'");
    }
    w.deprel = cols[7];
    w.deps = undash(cols[8]);
    w.misc = undash(cols[9]);
    sent.words.push_back(std::move(w));
  }
  flush(line_no + 1);
  return doc;
}

Document read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read(in);
}

Document read_string(const std::string& text) {
  std::istringstream in(text);
  return read(in);
}

void write(const Document& doc, std::ostream& out) {
  validate(doc, /*strict=*/false);
  for (const Sentence& sent : doc.sentences) {
    bool text_emitted = false;
    for (const std::string& c : sent.comments) {
      out << c << '\n';
      if (c.rfind("# text =", 0) == 0) text_emitted = true;
    }
    if (!sent.text.empty() && !text_emitted) out << "# text = " << sent.text << '\n';
    size_t ti = 0;
    for (size_t i = 0; i < sent.words.size(); ++i) {
      const Word& w = sent.words[i];
      std::string misc = w.misc;
      while (ti < sent.tokens.size() && sent.tokens[ti].start_id == w.id) {
        const Token& t = sent.tokens[ti];
        if (t.is_range()) {
          out << t.start_id << '-' << t.end_id << '\t' << t.form
              << "\t_\t_\t_\t_\t_\t_\t_\t" << dash(t.misc) << '\n';
        } else if (t.mwt) {
          misc = misc_add(misc, "MWT=Yes");
        }
        ++ti;
      }
      out << w.id << '\t' << dash(w.form) << '\t' << dash(w.lemma) << '\t' << dash(w.upos)
          << '\t' << dash(w.xpos) << '\t' << dash(w.ufeats) << '\t';
      if (w.head < 0) {
        out << '_';
      } else {
        out << w.head;
      }
      out << '\t' << dash(w.deprel) << '\t' << dash(w.deps) << '\t' << dash(misc) << '\n';
    }
    out << '\n';
  }
}

std::string write_string(const Document& doc) {
  std::ostringstream out;
  write(doc, out);
  return out.str();
}

bool is_valid_tree(const std::vector<int>& heads) {
  int n = static_cast<int>(heads.size());
  int roots = 0;
  for (int h : heads) {
    if (h < 0 || h > n) return false;
    if (h == 0) ++roots;
  }
  if (roots != 1) return false;
  // 0 = unvisited, 1 = on current path, 2 = done.
  std::vector<int> mark(static_cast<size_t>(n) + 1, 0);
  mark[0] = 2;
  for (int i = 1; i <= n; ++i) {
    int v = i;
    std::vector<int> path;
    while (mark[static_cast<size_t>(v)] == 0) {
      mark[static_cast<size_t>(v)] = 1;
      path.push_back(v);
      v = heads[static_cast<size_t>(v - 1)];
    }
    if (mark[static_cast<size_t>(v)] == 1) return false;  // cycle
    for (int p : path) mark[static_cast<size_t>(p)] = 2;
  }
  return true;
}

void validate(const Document& doc, bool strict) {
  for (size_t si = 0; si < doc.sentences.size(); ++si) {
    const Sentence& sent = doc.sentences[si];
    const std::string where = "sentence " + std::to_string(si + 1);
    if (sent.words.empty()) throw DataError(where + ": empty sentence");
    int n = static_cast<int>(sent.words.size());
    for (int i = 0; i < n; ++i) {
      if (sent.words[static_cast<size_t>(i)].id != i + 1)
        throw DataError(where + ": word ids are not 1..n");
    }
    int next = 1;
    for (const Token& t : sent.tokens) {
      if (t.start_id != next)
        throw DataError(where + ": token spans are not contiguous at word " +
                        std::to_string(next));
      if (t.end_id < t.start_id || t.end_id > n)
        throw DataError(where + ": bad token span");
      if (t.is_range() && !t.mwt)
        throw DataError(where + ": multi-word span not flagged as MWT");
      if (strict && t.mwt && !t.is_range())
        throw DataError(where + ": unexpanded MWT token at word " +
                        std::to_string(t.start_id));
      next = t.end_id + 1;
    }
    if (next != n + 1) throw DataError(where + ": token spans do not cover all words");

    bool any_head = false, all_heads = true;
    for (const Word& w : sent.words) {
      if (w.head >= 0) {
        any_head = true;
        if (w.head > n) throw DataError(where + ": head out of range");
      } else {
        all_heads = false;
      }
    }
    if (any_head && strict) {
      if (!all_heads) throw DataError(where + ": partially annotated heads");
      std::vector<int> heads;
      heads.reserve(static_cast<size_t>(n));
      for (const Word& w : sent.words) heads.push_back(w.head);
      if (!is_valid_tree(heads))
        throw DataError(where + ": head assignment is not a single-rooted tree");
      for (const Word& w : sent.words) {
        bool is_root_rel = w.deprel == "root" || w.deprel.rfind("root:", 0) == 0;
        if ((w.head == 0) != is_root_rel)
          throw DataError(where + ": head 0 must pair with deprel root (word " +
                          std::to_string(w.id) + ")");
      }
    }
  }
}

std::pair<Document, Document> train_dev_split(const Document& doc, int ratio) {
  if (ratio < 1) throw UsageError("split ratio must be >= 1");
  size_t need = static_cast<size_t>(ratio) + 1;
  if (doc.sentences.size() < need)
    throw DataError("need at least " + std::to_string(need) + " sentences to split, have " +
                    std::to_string(doc.sentences.size()));
  Document train, dev;
  for (size_t i = 0; i < doc.sentences.size(); ++i) {
    if ((i + 1) % need == 0) {
      dev.sentences.push_back(doc.sentences[i]);
    } else {
      train.sentences.push_back(doc.sentences[i]);
    }
  }
  return {std::move(train), std::move(dev)};
}

}  // namespace udkit::conllu
