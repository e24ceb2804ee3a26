#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace limitest {

/// The class-0 decision subset of the alphabet: t(x) = 1 iff x is not a
/// member. Stored as one flag per symbol.
struct DecisionRegime {
  std::vector<bool> members;

  DecisionRegime() = default;
  explicit DecisionRegime(std::size_t support_size) : members(support_size, false) {}

  static DecisionRegime from_indices(std::size_t support_size,
                                     std::initializer_list<std::size_t> idx) {
    DecisionRegime r(support_size);
    for (std::size_t i : idx) {
      if (i >= support_size) throw std::out_of_range("DecisionRegime: index out of range");
      r.members[i] = true;
    }
    return r;
  }

  std::size_t support_size() const noexcept { return members.size(); }
  bool contains(std::size_t i) const { return members.at(i); }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (bool b : members) c += b ? 1 : 0;
    return c;
  }

  bool operator==(const DecisionRegime& other) const = default;
};

}  // namespace limitest
