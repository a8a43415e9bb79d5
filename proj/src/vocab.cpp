// SPDX-License-Identifier: Apache-2.0

#include "robustnmt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "robustnmt/error.hpp"

namespace robustnmt {
namespace {

const char* kReservedForms[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_reserved_form(const std::string& token) {
  for (const char* form : kReservedForms)
    if (token == form) return true;
  return false;
}

}  // namespace

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) tokens.push_back(std::move(tok));
  return tokens;
}

Vocabulary::Vocabulary() {
  for (const char* form : kReservedForms) {
    token_to_id_.emplace(form, static_cast<std::int32_t>(id_to_token_.size()));
    id_to_token_.emplace_back(form);
    counts_.push_back(0);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& lines, std::size_t max_size,
                             std::size_t min_freq) {
  if (lines.empty()) throw DataError("build_vocab: empty corpus");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::vector<std::string> order;  // tokens by first occurrence
  for (const std::string& line : lines)
    for (std::string& tok : split_tokens(line)) {
      if (is_reserved_form(tok)) continue;
      auto [it, fresh] = counts.try_emplace(std::move(tok), 0);
      if (fresh) order.push_back(it->first);
      it->second += 1;
    }

  // frequency desc; stable sort keeps first-occurrence order among ties
  std::stable_sort(order.begin(), order.end(),
                   [&counts](const std::string& a, const std::string& b) {
                     return counts.at(a) > counts.at(b);
                   });

  Vocabulary vocab;
  for (const std::string& tok : order) {
    if (vocab.id_to_token_.size() - kReserved >= max_size) break;
    const std::uint64_t c = counts.at(tok);
    if (c < min_freq) continue;
    vocab.token_to_id_.emplace(tok, static_cast<std::int32_t>(vocab.id_to_token_.size()));
    vocab.id_to_token_.push_back(tok);
    vocab.counts_.push_back(c);
  }
  return vocab;
}

std::int32_t Vocabulary::id_of(const std::string& token) const {
  if (is_reserved_form(token)) return kUnk;
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw DataError("vocabulary: id " + std::to_string(id) + " outside table of " +
                    std::to_string(id_to_token_.size()) + " entries");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::count_of(std::int32_t id) const {
  (void)token_of(id);  // range check
  return counts_[static_cast<std::size_t>(id)];
}

Sentence Vocabulary::encode(const std::vector<std::string>& tokens) const {
  Sentence ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) ids.push_back(id_of(tok));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const Sentence& ids) const {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (std::int32_t id : ids) tokens.push_back(token_of(id));
  return tokens;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("vocabulary: cannot write " + path);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    out << id_to_token_[i] << '\t' << counts_[i] << '\n';
  if (!out.flush()) throw DataError("vocabulary: failed writing " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("vocabulary: cannot read " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("vocabulary: " + path + " line " + std::to_string(row + 1) +
                      " is not token<TAB>count");
    const std::string token = line.substr(0, tab);
    std::uint64_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocabulary: " + path + " line " + std::to_string(row + 1) +
                      " has a malformed count");
    }
    if (row < kReserved) {
      if (token != kReservedForms[row])
        throw DataError("vocabulary: " + path + " row " + std::to_string(row) +
                        " must be " + kReservedForms[row] + ", got " + token);
    } else {
      if (is_reserved_form(token) || vocab.token_to_id_.count(token))
        throw DataError("vocabulary: duplicate token " + token + " in " + path);
      vocab.token_to_id_.emplace(token, static_cast<std::int32_t>(vocab.id_to_token_.size()));
      vocab.id_to_token_.push_back(token);
      vocab.counts_.push_back(count);
    }
    ++row;
  }
  if (row < kReserved)
    throw DataError("vocabulary: " + path + " is missing the reserved rows");
  return vocab;
}

}  // namespace robustnmt
