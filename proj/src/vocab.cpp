#include "udkit/vocab.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace udkit {

Vocab::Vocab(bool with_bounds) {
  add("<pad>");
  add("<unk>");
  add("<drop>");
  if (with_bounds) {
    bos_ = add("<s>");
    eos_ = add("</s>");
  }
}

int Vocab::add(const std::string& s) {
  auto it = index_.find(s);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(items_.size());
  items_.push_back(s);
  index_.emplace(s, id);
  return id;
}

int Vocab::get(const std::string& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& s) const { return index_.count(s) > 0; }

Vocab Vocab::from_items(const std::vector<std::string>& items) {
  Vocab v{Raw{}};
  for (const auto& s : items) v.add(s);
  if (v.size() < 3 || v.items_[0] != "<pad>" || v.items_[1] != "<unk>" ||
      v.items_[2] != "<drop>")
    throw std::invalid_argument("vocab items lack the reserved prefix");
  if (v.contains("<s>")) v.bos_ = v.get("<s>");
  if (v.contains("</s>")) v.eos_ = v.get("</s>");
  return v;
}

void VocabBuilder::count(const std::string& s, long n) {
  auto [it, fresh] = counts_.emplace(s, 0);
  if (fresh) order_.push_back(s);
  it->second += n;
}

Vocab VocabBuilder::build(long min_count, bool with_bounds) const {
  Vocab v(with_bounds);
  for (const auto& s : order_)
    if (counts_.at(s) >= min_count) v.add(s);
  return v;
}

EmbeddingTable make_embedding(nn::ParamCollection& pc, const std::string& name,
                              Vocab vocab, int dim, nn::Rng& rng, bool trainable) {
  EmbeddingTable t;
  t.vocab = std::move(vocab);
  t.matrix = &pc.add(name, t.vocab.size(), dim);
  nn::init_normal(t.matrix->value, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  t.matrix->value.row(Vocab::kPad).setZero();
  t.matrix->trainable = trainable;
  return t;
}

std::vector<int> word_dropout_replace(const std::vector<int>& ids, double p,
                                      nn::Rng& rng, int drop_symbol) {
  if (p <= 0.0) return ids;
  std::bernoulli_distribution drop(std::min(p, 1.0));
  std::vector<int> out = ids;
  for (int& id : out)
    if (drop(rng)) id = drop_symbol;
  return out;
}

}  // namespace udkit
