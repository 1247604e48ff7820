#pragma once

#include <map>

#include "alignlab/aet.hpp"
#include "alignlab/induction.hpp"

namespace alignlab {

/// A dictionary constraint: when the aligner links a generated token into
/// src_span, that token is revised to tgt_tokens. Fires at most once.
struct Constraint {
    int start = 0;  // 1-based inclusive source span
    int end = 0;
    std::vector<int> tgt_tokens;  // non-empty, target vocab ids
};

/// Checks bounds against |x|, span length <= 3 and pairwise disjoint spans.
void validate_constraints(const std::vector<Constraint>& cs, int src_len);

/// Answers "which source position is the last committed target token
/// aligned to?" for a given prefix. Returns a 1-based position.
class AlignProbe {
  public:
    virtual ~AlignProbe() = default;
    virtual int align_last(const std::vector<int>& src, const std::vector<int>& prefix) = 0;
};

/// NAIVE/SHIFT attention probe over the base model at a fixed layer.
class AttnProbe : public AlignProbe {
  public:
    AttnProbe(const TransformerModel& model, InduceMethod method, int layer)
        : model_(&model), method_(method), layer_(layer) {}
    int align_last(const std::vector<int>& src, const std::vector<int>& prefix) override;

  private:
    const TransformerModel* model_;
    InduceMethod method_;
    int layer_;
};

class AetProbe : public AlignProbe {
  public:
    explicit AetProbe(const AetModel& model) : model_(&model) {}
    int align_last(const std::vector<int>& src, const std::vector<int>& prefix) override;

  private:
    const AetModel* model_;
};

/// Greedy decoding with constraint revision: after each generated token,
/// once its alignment is available under the probe, the token is replaced
/// by the matching unused constraint's full target sequence and decoding
/// resumes with recomputed state. probe == nullptr (or no constraints)
/// reduces to plain greedy decoding.
std::vector<int> guided_greedy_decode(const TransformerModel& model, AlignProbe* probe,
                                      const std::vector<int>& src,
                                      const std::vector<Constraint>& constraints, int max_len);

// Constraint files: one record per line,
// `sent_id<TAB>start-end<TAB>target tokens space-separated`, 1-based ids.
struct ConstraintRecord {
    int sent_id = 0;  // 1-based
    int start = 0;
    int end = 0;
    std::vector<std::string> tgt_tokens;
};

std::vector<ConstraintRecord> read_constraints(const std::string& path);
void write_constraints(const std::vector<ConstraintRecord>& recs, const std::string& path);

/// Samples up to `max_per_sent` non-overlapping constraints per sentence
/// from gold alignments: contiguous source spans of <= max_src_span words
/// whose aligned target words are contiguous, skipping stop words.
std::vector<ConstraintRecord> extract_constraints(
    const std::vector<std::vector<std::string>>& src_lines,
    const std::vector<std::vector<std::string>>& tgt_lines, const std::vector<AlignmentSet>& gold,
    const std::set<std::string>& stop_words, int max_per_sent, int max_src_span, Rng& rng);

}  // namespace alignlab
