#include "alignlab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace alignlab {

Vocab::Vocab() {
    id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (int i = 0; i < 4; ++i) token_to_id_[id_to_token_[size_t(i)]] = i;
}

int Vocab::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = int(id_to_token_.size());
    token_to_id_[token] = id;
    id_to_token_.push_back(token);
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw IndexError("vocab id out of range");
    return id_to_token_[size_t(id)];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write vocab file: " + path);
    for (int i = 0; i < size(); ++i) out << id_to_token_[size_t(i)] << '\t' << i << '\n';
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open vocab file: " + path);
    Vocab v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": missing tab");
        std::string tok = line.substr(0, tab);
        int id = std::stoi(line.substr(tab + 1));
        if (id < 4) {
            if (id < 0 || v.id_to_token_[size_t(id)] != tok)
                throw FormatError(path + ":" + std::to_string(lineno) +
                                  ": reserved id mismatch");
            continue;
        }
        int got = v.add(tok);
        if (got != id)
            throw FormatError(path + ":" + std::to_string(lineno) + ": non-contiguous id");
    }
    return v;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (auto& t : tokens) out.push_back(id(t));
    return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(split_tokens(line));
    return out;
}

void write_token_lines(const std::vector<std::vector<std::string>>& lines,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write file: " + path);
    for (auto& toks : lines) {
        for (size_t i = 0; i < toks.size(); ++i) {
            if (i) out << ' ';
            out << toks[i];
        }
        out << '\n';
    }
}

LoadedCorpus load_parallel(const std::string& src_path, const std::string& tgt_path,
                           int min_freq) {
    auto src_lines = read_token_lines(src_path);
    auto tgt_lines = read_token_lines(tgt_path);
    if (src_lines.size() != tgt_lines.size())
        throw FormatError("line count mismatch: " + src_path + " has " +
                          std::to_string(src_lines.size()) + " lines, " + tgt_path + " has " +
                          std::to_string(tgt_lines.size()));
    std::map<std::string, long> src_freq, tgt_freq;
    for (auto& l : src_lines)
        for (auto& t : l) ++src_freq[t];
    for (auto& l : tgt_lines)
        for (auto& t : l) ++tgt_freq[t];
    LoadedCorpus c;
    for (auto& [tok, f] : src_freq)
        if (f >= min_freq) c.src_vocab.add(tok);
    for (auto& [tok, f] : tgt_freq)
        if (f >= min_freq) c.tgt_vocab.add(tok);
    for (size_t i = 0; i < src_lines.size(); ++i) {
        if (src_lines[i].empty() || tgt_lines[i].empty()) {
            std::cerr << "warning: skipping empty line " << (i + 1) << "\n";
            continue;
        }
        ParallelPair p;
        p.src = c.src_vocab.encode(src_lines[i]);
        p.tgt = c.tgt_vocab.encode(tgt_lines[i]);
        c.pairs.push_back(std::move(p));
    }
    return c;
}

std::vector<ParallelPair> encode_parallel(const std::string& src_path, const std::string& tgt_path,
                                          const Vocab& src_vocab, const Vocab& tgt_vocab) {
    auto src_lines = read_token_lines(src_path);
    auto tgt_lines = read_token_lines(tgt_path);
    if (src_lines.size() != tgt_lines.size())
        throw FormatError("line count mismatch between " + src_path + " and " + tgt_path);
    std::vector<ParallelPair> pairs;
    for (size_t i = 0; i < src_lines.size(); ++i) {
        if (src_lines[i].empty() || tgt_lines[i].empty()) {
            std::cerr << "warning: skipping empty line " << (i + 1) << "\n";
            continue;
        }
        ParallelPair p;
        p.src = src_vocab.encode(src_lines[i]);
        p.tgt = tgt_vocab.encode(tgt_lines[i]);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

namespace {

std::pair<int, int> parse_link(const std::string& tok, const std::string& path, int lineno,
                               bool& sure) {
    size_t sep = tok.find('-');
    sure = true;
    if (sep == std::string::npos) {
        sep = tok.find('p');
        sure = false;
    }
    auto fail = [&](const char* why) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": " + why + " in '" + tok + "'");
    };
    if (sep == std::string::npos || sep == 0 || sep + 1 >= tok.size())
        fail("malformed link");
    int s = 0, t = 0;
    try {
        size_t used = 0;
        s = std::stoi(tok.substr(0, sep), &used);
        if (used != sep) fail("malformed link");
        std::string rest = tok.substr(sep + 1);
        t = std::stoi(rest, &used);
        if (used != rest.size()) fail("malformed link");
    } catch (const std::logic_error&) {
        fail("malformed link");
    }
    if (s < 1 || t < 1) fail("indices must be 1-based");
    return {s, t};
}

}  // namespace

std::vector<AlignmentSet> read_alignments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open alignment file: " + path);
    std::vector<AlignmentSet> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        AlignmentSet a;
        for (auto& tok : split_tokens(line)) {
            bool sure = false;
            auto [s, t] = parse_link(tok, path, lineno, sure);
            if (sure)
                a.add_sure(s, t);
            else
                a.add_possible(s, t);
        }
        out.push_back(std::move(a));
    }
    return out;
}

void write_alignments(const std::vector<AlignmentSet>& sets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write alignment file: " + path);
    for (auto& a : sets) {
        bool first = true;
        for (auto& [s, t] : a.sure) {
            if (!first) out << ' ';
            out << s << '-' << t;
            first = false;
        }
        for (auto& [s, t] : a.possible) {
            if (a.sure.count({s, t})) continue;
            if (!first) out << ' ';
            out << s << 'p' << t;
            first = false;
        }
        out << '\n';
    }
}

void SynthSpec::validate() const {
    if (vocab_size < 1) throw UsageError("synth: vocab size must be >= 1");
    if (len_min < 1 || len_max < len_min) throw UsageError("synth: bad length range");
    if (window < 1) throw UsageError("synth: window must be >= 1");
    for (double p : {p_swap, p_split, p_ins, p_rotate, p_jump})
        if (p < 0.0 || p > 1.0) throw UsageError("synth: probabilities must be in [0, 1]");
    if (noise_types < 1) throw UsageError("synth: need at least one noise token type");
}

SynthCorpus generate_synthetic(const SynthSpec& spec, int n) {
    spec.validate();
    SynthCorpus c;
    std::vector<int> src_ids(size_t(spec.vocab_size)), tgt_ids(size_t(spec.vocab_size));
    for (int i = 0; i < spec.vocab_size; ++i)
        src_ids[size_t(i)] = c.src_vocab.add("s" + std::to_string(i));
    for (int i = 0; i < spec.vocab_size; ++i)
        tgt_ids[size_t(i)] = c.tgt_vocab.add("t" + std::to_string(i));
    std::vector<int> noise_ids(size_t(spec.noise_types));
    for (int i = 0; i < spec.noise_types; ++i)
        noise_ids[size_t(i)] = c.tgt_vocab.add("n" + std::to_string(i));

    Rng rng(spec.seed);
    // bijective lexicon: source word w -> target word lex[w]
    std::vector<int> lex(size_t(spec.vocab_size));
    for (int i = 0; i < spec.vocab_size; ++i) lex[size_t(i)] = i;
    rng.shuffle(lex);

    struct Item {
        int src_pos;  // 1-based
        std::vector<int> toks;
    };

    for (int pi = 0; pi < n; ++pi) {
        int len = spec.len_min + int(rng.uniform_int(uint64_t(spec.len_max - spec.len_min + 1)));
        ParallelPair p;
        std::vector<Item> items;
        for (int k = 0; k < len; ++k) {
            int w = int(rng.uniform_int(uint64_t(spec.vocab_size)));
            p.src.push_back(src_ids[size_t(w)]);
            Item it;
            it.src_pos = k + 1;
            int tw = tgt_ids[size_t(lex[size_t(w)])];
            it.toks.push_back(tw);
            if (rng.bernoulli(spec.p_split)) it.toks.push_back(tw);
            items.push_back(std::move(it));
        }
        if (spec.p_rotate > 0.0 && rng.bernoulli(spec.p_rotate)) {
            // rewrite the target-side order: start somewhere, walk the still
            // unread source positions cyclically, occasionally jump to a
            // random unread one. Absolute target position then says nothing
            // about which source position a token came from.
            std::vector<Item> base = std::move(items);
            size_t m = base.size();
            std::vector<char> used(m, 0);
            items.clear();
            size_t cur = size_t(rng.uniform_int(uint64_t(m)));
            for (size_t step = 0; step < m; ++step) {
                size_t pick = cur;
                if (step > 0 && rng.bernoulli(spec.p_jump)) {
                    size_t r = size_t(rng.uniform_int(uint64_t(m - step)));
                    for (size_t j = 0; j < m; ++j)
                        if (!used[j] && r-- == 0) { pick = j; break; }
                } else {
                    while (used[pick]) pick = (pick + 1) % m;
                }
                used[pick] = 1;
                items.push_back(std::move(base[pick]));
                cur = (pick + 1) % m;
            }
        }
        if (spec.window > 1) {
            for (size_t start = 0; start < items.size(); start += size_t(spec.window)) {
                size_t end = std::min(items.size(), start + size_t(spec.window));
                std::vector<Item> chunk(items.begin() + long(start), items.begin() + long(end));
                rng.shuffle(chunk);
                std::copy(chunk.begin(), chunk.end(), items.begin() + long(start));
            }
        }
        for (size_t i = 0; i + 1 < items.size(); ++i)
            if (rng.bernoulli(spec.p_swap)) std::swap(items[i], items[i + 1]);

        AlignmentSet gold;
        for (size_t i = 0; i <= items.size(); ++i) {
            if (rng.bernoulli(spec.p_ins)) {
                int nz = int(rng.uniform_int(uint64_t(spec.noise_types)));
                p.tgt.push_back(noise_ids[size_t(nz)]);
            }
            if (i == items.size()) break;
            for (int tok : items[i].toks) {
                p.tgt.push_back(tok);
                gold.add_sure(items[i].src_pos, int(p.tgt.size()));
            }
        }
        p.gold = std::move(gold);
        c.pairs.push_back(std::move(p));
    }
    return c;
}

}  // namespace alignlab
