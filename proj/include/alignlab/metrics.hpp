#pragma once

#include "alignlab/corpus.hpp"

namespace alignlab {

struct AerCounts {
    long a = 0;        // |A| (hypothesis sure links)
    long a_cap_s = 0;  // |A n S|
    long a_cap_p = 0;  // |A n P|
    long s = 0;        // |S| (reference sure links)

    void add(const AlignmentSet& hyp, const AlignmentSet& ref);
    // AER = 1 - (|A n S| + |A n P|) / (|A| + |S|); 0 when the denominator is 0.
    double aer() const;
    double precision() const;  // |A n P| / |A|, empty denominator -> 1
    double recall() const;     // |A n S| / |S|, empty denominator -> 1
};

double aer(const AlignmentSet& hyp, const AlignmentSet& ref);
std::pair<double, double> precision_recall(const AlignmentSet& hyp, const AlignmentSet& ref);

/// Corpus-level AER pools counts over all sentence pairs before dividing.
AerCounts corpus_aer(const std::vector<AlignmentSet>& hyp, const std::vector<AlignmentSet>& ref);

/// Corpus BLEU-4 with brevity penalty in [0, 1]; add-one smoothing on
/// n >= 2 precisions only when the raw match count is zero.
double bleu(const std::vector<std::vector<std::string>>& hyps,
            const std::vector<std::vector<std::string>>& refs);

}  // namespace alignlab
