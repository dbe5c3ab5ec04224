#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "udkit/nn/params.hpp"

namespace udkit {

// String-to-index map with reserved entries at fixed indices. Sequence
// vocabularies (with_bounds) also reserve begin/end markers.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kDrop = 2;

  explicit Vocab(bool with_bounds = false);

  int add(const std::string& s);
  int get(const std::string& s) const;  // kUnk when absent
  bool contains(const std::string& s) const;
  const std::string& name(int id) const { return items_.at(static_cast<size_t>(id)); }
  int size() const { return static_cast<int>(items_.size()); }
  int bos() const { return bos_; }  // -1 without bounds
  int eos() const { return eos_; }

  const std::vector<std::string>& items() const { return items_; }
  static Vocab from_items(const std::vector<std::string>& items);

 private:
  struct Raw {};
  explicit Vocab(Raw) {}
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_;
  int bos_ = -1, eos_ = -1;
};

// Frequency-thresholded vocabulary builder.
class VocabBuilder {
 public:
  void count(const std::string& s, long n = 1);
  Vocab build(long min_count = 1, bool with_bounds = false) const;

 private:
  std::vector<std::string> order_;  // first-seen order, for determinism
  std::unordered_map<std::string, long> counts_;
};

// Vocabulary plus its embedding matrix (|V| x d rows).
struct EmbeddingTable {
  Vocab vocab;
  nn::Param* matrix = nullptr;
  int dim() const { return matrix ? matrix->cols() : 0; }
};

EmbeddingTable make_embedding(nn::ParamCollection& pc, const std::string& name,
                              Vocab vocab, int dim, nn::Rng& rng,
                              bool trainable = true);

// Independently replaces each id with the drop symbol with probability p.
std::vector<int> word_dropout_replace(const std::vector<int>& ids, double p,
                                      nn::Rng& rng, int drop_symbol = Vocab::kDrop);

}  // namespace udkit
