#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mdlab {

// BPE over whitespace-pretokenized words. Each word is a codepoint sequence
// prefixed with the boundary marker symbol (U+2581); merges are learned
// greedily by pair frequency with lexicographic tie-breaks. Ids 0-4 are the
// special tokens, the base alphabet follows in sorted order, then merge
// outputs in rank order.
class Tokenizer {
  public:
    static Tokenizer train(const std::vector<std::string>& corpus_lines, int vocab_size);
    static Tokenizer load(const std::string& path);
    static Tokenizer from_text(const std::string& file_contents);

    void save(const std::string& path) const;
    std::string to_text() const;

    // Whitespace runs are treated as single separators; unknown codepoints
    // become UNK. Never emits special ids for plain text.
    std::vector<int> encode(const std::string& text) const;

    // Exact inverse of encode on whitespace-normalized text.
    std::string decode(const std::vector<int>& ids) const;

    int vocab_size() const { return static_cast<int>(id_to_token_.size()); }
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
    int id_for(const std::string& token) const;   // -1 if absent
    const std::string& token_for(int id) const;   // DataError when out of range

  private:
    Tokenizer() = default;
    int add_token(const std::string& token);
    std::vector<std::string> merge_word(std::vector<std::string> symbols) const;

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::unordered_map<std::string, int> merge_rank_;  // "left\nright" -> rank
};

}  // namespace mdlab
