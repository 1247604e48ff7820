#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "alignlab/common.hpp"

namespace alignlab {

// Reserved token ids shared by every vocabulary.
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kUnk = 3;

class Vocab {
  public:
    Vocab();

    int add(const std::string& token);  // returns existing id if present
    int id(const std::string& token) const;  // kUnk when missing
    const std::string& token(int id) const;
    int size() const { return int(id_to_token_.size()); }

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

  private:
    std::map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

// 1-based (source_pos, target_pos) links with a sure/possible split.
// Hypothesis sets keep possible == sure.
struct AlignmentSet {
    std::set<std::pair<int, int>> sure;
    std::set<std::pair<int, int>> possible;

    void add_sure(int s, int t) {
        sure.insert({s, t});
        possible.insert({s, t});
    }
    void add_possible(int s, int t) { possible.insert({s, t}); }
    bool operator==(const AlignmentSet& o) const = default;
};

struct ParallelPair {
    std::vector<int> src;  // no special tokens
    std::vector<int> tgt;
    std::optional<AlignmentSet> gold;
};

std::vector<std::string> split_tokens(const std::string& line);

struct LoadedCorpus {
    Vocab src_vocab;
    Vocab tgt_vocab;
    std::vector<ParallelPair> pairs;
};

/// Builds vocabularies from the given files (min_freq filters rare tokens
/// to <unk>) and encodes every non-empty line pair. Empty lines on either
/// side skip the pair with a warning on stderr.
LoadedCorpus load_parallel(const std::string& src_path, const std::string& tgt_path,
                           int min_freq = 1);

/// Encodes files against existing vocabularies (OOV -> <unk>).
std::vector<ParallelPair> encode_parallel(const std::string& src_path, const std::string& tgt_path,
                                          const Vocab& src_vocab, const Vocab& tgt_vocab);

std::vector<std::vector<std::string>> read_token_lines(const std::string& path);

// talp alignment files: per line, space-separated `s-t` (sure) and `spt`
// (possible) 1-based links, source index first.
std::vector<AlignmentSet> read_alignments(const std::string& path);
void write_alignments(const std::vector<AlignmentSet>& sets, const std::string& path);

struct SynthSpec {
    int vocab_size = 50;
    int len_min = 3;
    int len_max = 10;
    double p_swap = 0.0;   // adjacent-swap probability
    int window = 1;        // block-permutation window
    double p_split = 0.0;  // one source word -> two target words
    double p_ins = 0.0;    // unaligned target-only noise token
    double p_rotate = 0.0;  // per-sentence chance of a rotated read order
    double p_jump = 0.0;    // chance of jumping to a random unread position
    int noise_types = 10;
    uint64_t seed = 1;

    void validate() const;
};

struct SynthCorpus {
    Vocab src_vocab;
    Vocab tgt_vocab;
    std::vector<ParallelPair> pairs;  // every pair carries gold
};

/// Deterministic toy parallel corpus whose gold alignments are exact by
/// construction: a seeded bijective lexicon, optional fertility splits,
/// a rotated/jumping source read order on a fraction of sentences, windowed
/// block permutation, adjacent swaps and unaligned noise tokens.
SynthCorpus generate_synthetic(const SynthSpec& spec, int n);

void write_token_lines(const std::vector<std::vector<std::string>>& lines,
                       const std::string& path);

}  // namespace alignlab
