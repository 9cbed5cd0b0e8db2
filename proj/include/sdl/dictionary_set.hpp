#ifndef SDL_DICTIONARY_SET_HPP
#define SDL_DICTIONARY_SET_HPP

#include "sdl/common.hpp"

namespace sdl {

/// C class blocks of K' atoms each, stored side by side as the global M x K
/// dictionary. Class labels run 1..C; block c occupies columns
/// [(c-1)K', cK').
class DictionarySet {
 public:
  DictionarySet() = default;

  DictionarySet(Matrix atoms, int block_size) : atoms_(std::move(atoms)), block_size_(block_size) {
    require(block_size_ >= 1, "block size must be >= 1");
    require(atoms_.cols() > 0 && atoms_.cols() % block_size_ == 0,
            "atom count must be a positive multiple of the block size");
    require(atoms_.rows() > 0, "atoms must have positive dimension");
  }

  static DictionarySet from_blocks(const std::vector<Matrix>& blocks) {
    require(!blocks.empty(), "need at least one class block");
    const auto m = blocks[0].rows();
    const auto kp = blocks[0].cols();
    Matrix all(m, kp * static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t c = 0; c < blocks.size(); ++c) {
      require(blocks[c].rows() == m && blocks[c].cols() == kp, "class blocks must share a shape");
      all.middleCols(static_cast<Eigen::Index>(c) * kp, kp) = blocks[c];
    }
    return DictionarySet(std::move(all), static_cast<int>(kp));
  }

  int dim() const { return static_cast<int>(atoms_.rows()); }
  int block_size() const { return block_size_; }
  int classes() const { return block_size_ ? static_cast<int>(atoms_.cols()) / block_size_ : 0; }
  int total_atoms() const { return static_cast<int>(atoms_.cols()); }

  const Matrix& atoms() const { return atoms_; }
  Matrix& atoms() { return atoms_; }

  int block_start(int label) const {
    require(label >= 1 && label <= classes(), "class label out of range");
    return (label - 1) * block_size_;
  }

  auto block(int label) const { return atoms_.middleCols(block_start(label), block_size_); }
  auto block(int label) { return atoms_.middleCols(block_start(label), block_size_); }

  double max_atom_norm() const { return atoms_.colwise().norm().maxCoeff(); }

 private:
  Matrix atoms_;
  int block_size_ = 0;
};

/// Labels must lie in 1..classes.
inline void check_labels(const std::vector<int>& labels, int classes) {
  for (int y : labels) require(y >= 1 && y <= classes, "label " + std::to_string(y) + " out of range");
}

}  // namespace sdl

#endif  // SDL_DICTIONARY_SET_HPP
