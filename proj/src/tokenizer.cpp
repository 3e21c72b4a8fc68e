#include "mdlab/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "mdlab/errors.hpp"
#include "mdlab/special_tokens.hpp"

namespace mdlab {

namespace {

const char kBoundary[] = "\xe2\x96\x81";  // U+2581, marks a word start

const char* const kSpecialNames[kNumSpecialTokens] = {"<pad>", "<unk>", "<cls>", "<sep>",
                                                      "<mask>"};

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) {
        words.push_back(std::move(cur));
    }
    return words;
}

std::vector<std::string> split_codepoints(const std::string& word) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < word.size()) {
        unsigned char c = static_cast<unsigned char>(word[i]);
        size_t len = 1;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
        }
        if (i + len > word.size()) {
            len = 1;  // malformed tail: keep the byte as its own symbol
        } else {
            for (size_t k = 1; k < len; ++k) {
                if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) {
                    len = 1;
                    break;
                }
            }
        }
        out.push_back(word.substr(i, len));
        i += len;
    }
    return out;
}

std::vector<std::string> word_symbols(const std::string& word) {
    std::vector<std::string> symbols;
    symbols.emplace_back(kBoundary);
    for (auto& cp : split_codepoints(word)) {
        symbols.push_back(std::move(cp));
    }
    return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left,
                 const std::string& right) {
    size_t w = 0;
    for (size_t r = 0; r < symbols.size();) {
        if (r + 1 < symbols.size() && symbols[r] == left && symbols[r + 1] == right) {
            symbols[w++] = left + right;
            r += 2;
        } else {
            if (w != r) {
                symbols[w] = std::move(symbols[r]);
            }
            ++w;
            ++r;
        }
    }
    symbols.resize(w);
}

}  // namespace

int Tokenizer::add_token(const std::string& token) {
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

Tokenizer Tokenizer::train(const std::vector<std::string>& corpus_lines, int vocab_size) {
    // Distinct words with counts; merge work happens on these, weighted.
    std::map<std::string, int64_t> word_counts;
    for (const std::string& line : corpus_lines) {
        for (const std::string& w : split_words(line)) {
            ++word_counts[w];
        }
    }
    if (word_counts.empty()) {
        throw DataError("tokenizer: empty corpus");
    }

    std::vector<std::vector<std::string>> words;
    std::vector<int64_t> counts;
    words.reserve(word_counts.size());
    for (const auto& [w, n] : word_counts) {
        words.push_back(word_symbols(w));
        counts.push_back(n);
    }

    std::map<std::string, int> alphabet;
    for (const auto& seq : words) {
        for (const auto& s : seq) {
            alphabet.emplace(s, 0);
        }
    }

    Tokenizer tok;
    for (const char* name : kSpecialNames) {
        tok.add_token(name);
    }
    for (const auto& [sym, unused] : alphabet) {
        tok.add_token(sym);
    }
    if (vocab_size < tok.vocab_size()) {
        throw DataError("tokenizer: vocab_size " + std::to_string(vocab_size) +
                        " is below the " + std::to_string(tok.vocab_size()) +
                        " needed for the alphabet and special tokens");
    }

    while (tok.vocab_size() < vocab_size) {
        std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
        for (size_t wi = 0; wi < words.size(); ++wi) {
            const auto& seq = words[wi];
            for (size_t i = 0; i + 1 < seq.size(); ++i) {
                pair_counts[{seq[i], seq[i + 1]}] += counts[wi];
            }
        }
        // Sorted map: the first maximum is the lexicographically smallest pair.
        const std::pair<std::string, std::string>* best = nullptr;
        int64_t best_count = 0;
        for (const auto& [pair, n] : pair_counts) {
            if (n > best_count) {
                best_count = n;
                best = &pair;
            }
        }
        if (best == nullptr || best_count < 2) {
            break;  // nothing repeats, further merges would memorize noise
        }
        auto [left, right] = *best;
        tok.merge_rank_.emplace(left + "\n" + right, static_cast<int>(tok.merges_.size()));
        tok.merges_.emplace_back(left, right);
        tok.add_token(left + right);
        for (auto& seq : words) {
            apply_merge(seq, left, right);
        }
    }
    return tok;
}

std::vector<std::string> Tokenizer::merge_word(std::vector<std::string> symbols) const {
    while (symbols.size() > 1) {
        int best_rank = -1;
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < symbols.size(); ++i) {
            auto it = merge_rank_.find(symbols[i] + "\n" + symbols[i + 1]);
            if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank < 0) {
            break;
        }
        // Copies: apply_merge rewrites the vector the references would point into.
        std::string left = symbols[best_pos];
        std::string right = symbols[best_pos + 1];
        apply_merge(symbols, left, right);
    }
    return symbols;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& w : split_words(text)) {
        for (const std::string& sym : merge_word(word_symbols(w))) {
            auto it = token_to_id_.find(sym);
            ids.push_back(it == token_to_id_.end() ? kUnkId : it->second);
        }
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string joined;
    for (int id : ids) {
        joined += token_for(id);
    }
    std::string out;
    size_t i = 0;
    const size_t blen = sizeof(kBoundary) - 1;
    while (i < joined.size()) {
        if (joined.compare(i, blen, kBoundary) == 0) {
            if (!out.empty()) {
                out.push_back(' ');
            }
            i += blen;
        } else {
            out.push_back(joined[i]);
            ++i;
        }
    }
    return out;
}

int Tokenizer::id_for(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Tokenizer::token_for(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw DataError("tokenizer: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<size_t>(id)];
}

std::string Tokenizer::to_text() const {
    std::ostringstream out;
    out << "mdlab-vocab 1\n";
    out << "specials";
    for (const char* name : kSpecialNames) {
        out << ' ' << name;
    }
    out << '\n';
    const int alphabet = vocab_size() - kNumSpecialTokens - static_cast<int>(merges_.size());
    out << "alphabet " << alphabet << '\n';
    for (int i = 0; i < alphabet; ++i) {
        out << id_to_token_[static_cast<size_t>(kNumSpecialTokens + i)] << '\n';
    }
    out << "merges " << merges_.size() << '\n';
    for (const auto& [left, right] : merges_) {
        out << left << ' ' << right << '\n';
    }
    return out.str();
}

void Tokenizer::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("tokenizer: cannot write " + path);
    }
    out << to_text();
    if (!out) {
        throw DataError("tokenizer: write failed for " + path);
    }
}

Tokenizer Tokenizer::from_text(const std::string& file_contents) {
    std::istringstream in(file_contents);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no + 1) +
                            ": unexpected end of file");
        }
        ++line_no;
    };

    next_line();
    if (line != "mdlab-vocab 1") {
        throw DataError("tokenizer: vocab:1: unrecognized header \"" + line + "\"");
    }
    next_line();
    {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag != "specials") {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                            ": expected specials block");
        }
        for (const char* name : kSpecialNames) {
            std::string got;
            if (!(ls >> got) || got != name) {
                throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                                ": specials block must list " + std::string(name));
            }
        }
    }

    Tokenizer tok;
    for (const char* name : kSpecialNames) {
        tok.add_token(name);
    }

    next_line();
    int alphabet = 0;
    {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag >> alphabet) || tag != "alphabet" || alphabet < 0) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                            ": expected \"alphabet <count>\"");
        }
    }
    for (int i = 0; i < alphabet; ++i) {
        next_line();
        if (line.empty()) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) + ": empty alphabet symbol");
        }
        tok.add_token(line);
    }

    next_line();
    int n_merges = 0;
    {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag >> n_merges) || tag != "merges" || n_merges < 0) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                            ": expected \"merges <count>\"");
        }
    }
    for (int i = 0; i < n_merges; ++i) {
        next_line();
        std::istringstream ls(line);
        std::string left, right, extra;
        if (!(ls >> left >> right) || (ls >> extra)) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                            ": expected \"<left> <right>\"");
        }
        tok.merge_rank_.emplace(left + "\n" + right, i);
        tok.merges_.emplace_back(left, right);
        tok.add_token(left + right);
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty()) {
            throw DataError("tokenizer: vocab:" + std::to_string(line_no) +
                            ": unexpected content after merges");
        }
    }
    return tok;
}

Tokenizer Tokenizer::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("tokenizer: cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

}  // namespace mdlab
