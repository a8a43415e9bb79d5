// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace robustnmt {

// Token-id sequence as stored in a corpus: content tokens only, no BOS/EOS.
using Sentence = std::vector<std::int32_t>;

// Token table with four fixed reserved ids. `max_size` caps the number of
// kept content tokens; reserved ids sit below them and never count against
// the cap. Content ids start at 4 and follow (frequency desc, first seen asc)
// order. Reserved surface forms appearing in raw text are not treated as
// content; they encode to UNK.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kBos = 2;
  static constexpr std::int32_t kEos = 3;
  static constexpr std::size_t kReserved = 4;

  // Builds from whitespace-tokenized lines. Tokens below min_freq or beyond
  // the max_size most frequent are dropped (they encode to UNK later).
  static Vocabulary build(const std::vector<std::string>& lines, std::size_t max_size,
                          std::size_t min_freq);

  // One "token<TAB>count" line per id, in id order, reserved rows first.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::int32_t id_of(const std::string& token) const;  // UNK when not kept
  const std::string& token_of(std::int32_t id) const;
  std::uint64_t count_of(std::int32_t id) const;

  Sentence encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const Sentence& ids) const;

 private:
  Vocabulary();

  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> counts_;
};

std::vector<std::string> split_tokens(const std::string& line);

}  // namespace robustnmt
