#include "udkit/mwt.hpp"

#include <fstream>
#include <sstream>

#include "udkit/error.hpp"
#include "udkit/nn/serialize.hpp"
#include "udkit/utf8.hpp"

namespace udkit {

namespace {

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string w;
  while (iss >> w) out.push_back(w);
  return out;
}

std::string join_spaces(const std::vector<std::string>& words) {
  std::string s;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

// Surface form and lowercased expansion of every MWT range in the document.
std::vector<std::pair<std::string, std::vector<std::string>>> mwt_pairs(
    const conllu::Document& doc, bool lowercase) {
  std::vector<std::pair<std::string, std::vector<std::string>>> pairs;
  for (const auto& sent : doc.sentences)
    for (const auto& tok : sent.tokens) {
      if (!tok.is_range()) continue;
      std::vector<std::string> words;
      for (int id = tok.start_id; id <= tok.end_id; ++id) {
        const std::string& f = sent.words[static_cast<size_t>(id - 1)].form;
        words.push_back(lowercase ? utf8::to_lower(f) : f);
      }
      pairs.emplace_back(tok.form, std::move(words));
    }
  return pairs;
}

}  // namespace

ExpansionLexicon build_lexicon(const conllu::Document& train) {
  // Per key, expansions in first-seen order with counts; modal expansion
  // wins strictly, so the earliest of a tie is kept.
  std::map<std::string, std::vector<std::pair<std::vector<std::string>, long>>>
      seen;
  for (auto& [form, words] : mwt_pairs(train, true)) {
    std::string key = utf8::to_lower(form);
    auto& variants = seen[key];
    bool found = false;
    for (auto& v : variants)
      if (v.first == words) {
        ++v.second;
        found = true;
        break;
      }
    if (!found) variants.emplace_back(words, 1);
  }
  ExpansionLexicon lex;
  for (auto& [key, variants] : seen) {
    const auto* best = &variants[0];
    for (const auto& v : variants)
      if (v.second > best->second) best = &v;
    lex.entries[key] = {best->first, best->second};
  }
  return lex;
}

void save_lexicon(const ExpansionLexicon& lex, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [form, entry] : lex.entries)
    out << form << '\t' << join_spaces(entry.words) << '\t' << entry.count
        << '\n';
}

ExpansionLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  ExpansionLexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos
                                        : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": expected form<TAB>words<TAB>count");
    ExpansionEntry e;
    e.words = split_spaces(line.substr(t1 + 1, t2 - t1 - 1));
    if (e.words.empty())
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": empty expansion");
    try {
      e.count = std::stol(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": bad count");
    }
    lex.entries[line.substr(0, t1)] = std::move(e);
  }
  return lex;
}

MwtModel make_mwt_model(const Seq2SeqConfig& cfg, Vocab symbols,
                        uint64_t seed) {
  MwtModel m;
  nn::Rng rng(seed);
  m.s2s = make_seq2seq(m.pc, "mwt", cfg, std::move(symbols), rng);
  return m;
}

void save_mwt_model(const MwtModel& m, const std::string& path) {
  nn::ModelHeader h;
  h.type = "mwt";
  h.hparams = {{"emb_dim", m.s2s.cfg.emb_dim},
               {"enc_hidden", m.s2s.cfg.enc_hidden},
               {"dec_hidden", m.s2s.cfg.dec_hidden},
               {"dropout", m.s2s.cfg.dropout},
               {"beam_size", m.s2s.cfg.beam_size}};
  h.vocabs["symbols"] = m.s2s.vocab.items();
  save_model(path, h, m.pc);
}

MwtModel load_mwt_model(const std::string& path) {
  nn::ModelHeader h = nn::read_model_header(path);
  if (h.type != "mwt")
    throw DataError(path + " holds a '" + h.type + "' model, expected mwt");
  Seq2SeqConfig cfg;
  cfg.emb_dim = h.hparams.at("emb_dim").get<int>();
  cfg.enc_hidden = h.hparams.at("enc_hidden").get<int>();
  cfg.dec_hidden = h.hparams.at("dec_hidden").get<int>();
  cfg.dropout = h.hparams.at("dropout").get<double>();
  cfg.beam_size = h.hparams.at("beam_size").get<int>();
  MwtModel m = make_mwt_model(cfg, Vocab::from_items(h.vocabs.at("symbols")), 0);
  load_model_values(path, m.pc);
  return m;
}

std::vector<std::string> expand(const std::string& form,
                                const ExpansionLexicon& lex,
                                const MwtModel* model, ExpandRoute* route,
                                std::vector<std::string>* probe_log) {
  auto set_route = [&](ExpandRoute r) {
    if (route) *route = r;
  };
  if (probe_log) probe_log->push_back(form);
  if (const ExpansionEntry* e = lex.find(form)) {
    set_route(ExpandRoute::kDict);
    return e->words;
  }
  std::string lower = utf8::to_lower(form);
  if (probe_log) probe_log->push_back(lower);
  if (const ExpansionEntry* e = lex.find(lower)) {
    set_route(ExpandRoute::kLowerDict);
    return e->words;
  }
  if (model) {
    std::string decoded = decode_string(model->s2s, form);
    std::vector<std::string> words = split_spaces(decoded);
    if (!words.empty()) {
      set_route(ExpandRoute::kNeural);
      return words;
    }
  }
  set_route(ExpandRoute::kIdentity);
  return {form};
}

void expand_document(conllu::Document& doc, const ExpansionLexicon& lex,
                     const MwtModel* model) {
  for (auto& sent : doc.sentences) {
    bool any = false;
    for (const auto& t : sent.tokens)
      if (t.mwt && !t.is_range()) any = true;
    if (!any) continue;

    std::vector<conllu::Word> words;
    std::vector<conllu::Token> tokens;
    std::vector<int> id_map(sent.words.size() + 1, 0);  // old id -> new id
    for (const auto& tok : sent.tokens) {
      if (tok.mwt && !tok.is_range()) {
        const conllu::Word& old = sent.words[static_cast<size_t>(tok.start_id - 1)];
        std::vector<std::string> expansion = expand(tok.form, lex, model);
        conllu::Token t;
        t.start_id = static_cast<int>(words.size()) + 1;
        t.form = tok.form;
        t.misc = tok.misc;
        id_map[static_cast<size_t>(tok.start_id)] =
            static_cast<int>(words.size()) + 1;
        for (const std::string& wf : expansion) {
          conllu::Word w;
          w.id = static_cast<int>(words.size()) + 1;
          w.form = wf;
          if (expansion.size() == 1) {
            // Single-word expansion: a plain word, not a range.
            w.misc = old.misc;
          }
          words.push_back(std::move(w));
        }
        t.end_id = static_cast<int>(words.size());
        if (expansion.size() > 1) {
          t.mwt = true;
          // Spacing attaches to the surface token.
          if (conllu::misc_has(old.misc, "SpaceAfter=No"))
            t.misc = conllu::misc_add(t.misc, "SpaceAfter=No");
          tokens.push_back(std::move(t));
        } else {
          t.mwt = false;
          tokens.push_back(std::move(t));
        }
      } else {
        // Copy, renumbering the covered words.
        int offset = static_cast<int>(words.size()) + 1 - tok.start_id;
        conllu::Token t = tok;
        t.start_id += offset;
        t.end_id += offset;
        for (int id = tok.start_id; id <= tok.end_id; ++id) {
          conllu::Word w = sent.words[static_cast<size_t>(id - 1)];
          id_map[static_cast<size_t>(id)] = id + offset;
          w.id = id + offset;
          words.push_back(std::move(w));
        }
        tokens.push_back(std::move(t));
      }
    }
    for (auto& w : words)
      if (w.head > 0) w.head = id_map[static_cast<size_t>(w.head)];
    sent.words = std::move(words);
    sent.tokens = std::move(tokens);
  }
}

MwtModel train_mwt(const conllu::Document& train, const conllu::Document& dev,
                   const Seq2SeqConfig& cfg, const Seq2SeqTrainConfig& tc) {
  auto train_pairs = mwt_pairs(train, false);
  if (train_pairs.empty()) throw DataError("no multi-word tokens in training data");
  auto dev_pairs = mwt_pairs(dev, false);

  VocabBuilder vb;
  for (const auto& [form, words] : train_pairs) {
    for (char32_t c : utf8::decode(form)) vb.count(utf8::encode_one(c));
    for (char32_t c : utf8::decode(join_spaces(words)))
      vb.count(utf8::encode_one(c));
  }
  MwtModel m = make_mwt_model(cfg, vb.build(1, true), tc.seed);

  auto to_examples = [&](const auto& pairs) {
    std::vector<Seq2SeqExample> ex;
    for (const auto& [form, words] : pairs)
      ex.push_back({symbol_ids(m.s2s.vocab, form),
                    symbol_ids(m.s2s.vocab, join_spaces(words))});
    return ex;
  };
  train_seq2seq(m.pc, m.s2s, to_examples(train_pairs), to_examples(dev_pairs),
                tc);
  return m;
}

}  // namespace udkit
