#include "alignlab/metrics.hpp"

#include <cmath>
#include <map>

namespace alignlab {

void AerCounts::add(const AlignmentSet& hyp, const AlignmentSet& ref) {
    a += long(hyp.sure.size());
    s += long(ref.sure.size());
    for (auto& l : hyp.sure) {
        if (ref.sure.count(l)) ++a_cap_s;
        if (ref.possible.count(l)) ++a_cap_p;
    }
}

double AerCounts::aer() const {
    long denom = a + s;
    if (denom == 0) return 0.0;
    return 1.0 - double(a_cap_s + a_cap_p) / double(denom);
}

double AerCounts::precision() const { return a == 0 ? 1.0 : double(a_cap_p) / double(a); }
double AerCounts::recall() const { return s == 0 ? 1.0 : double(a_cap_s) / double(s); }

double aer(const AlignmentSet& hyp, const AlignmentSet& ref) {
    AerCounts c;
    c.add(hyp, ref);
    return c.aer();
}

std::pair<double, double> precision_recall(const AlignmentSet& hyp, const AlignmentSet& ref) {
    AerCounts c;
    c.add(hyp, ref);
    return {c.precision(), c.recall()};
}

AerCounts corpus_aer(const std::vector<AlignmentSet>& hyp, const std::vector<AlignmentSet>& ref) {
    if (hyp.size() != ref.size()) throw UsageError("corpus_aer: sentence count mismatch");
    AerCounts c;
    for (size_t i = 0; i < hyp.size(); ++i) c.add(hyp[i], ref[i]);
    return c;
}

namespace {

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& toks,
                                                      int n) {
    std::map<std::vector<std::string>, long> counts;
    if (int(toks.size()) < n) return counts;
    for (size_t i = 0; i + size_t(n) <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + long(i), toks.begin() + long(i + size_t(n)))];
    return counts;
}

}  // namespace

double bleu(const std::vector<std::vector<std::string>>& hyps,
            const std::vector<std::vector<std::string>>& refs) {
    if (hyps.empty() || hyps.size() != refs.size())
        throw UsageError("bleu: need equal, non-zero sentence counts");
    long hyp_len = 0, ref_len = 0;
    long matched[4] = {0, 0, 0, 0};
    long total[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < hyps.size(); ++i) {
        hyp_len += long(hyps[i].size());
        ref_len += long(refs[i].size());
        for (int n = 1; n <= 4; ++n) {
            auto h = ngram_counts(hyps[i], n);
            auto r = ngram_counts(refs[i], n);
            for (auto& [g, c] : h) {
                total[n - 1] += c;
                auto it = r.find(g);
                if (it != r.end()) matched[n - 1] += std::min(c, it->second);
            }
        }
    }
    if (hyp_len == 0) return 0.0;
    double log_prec = 0.0;
    for (int n = 1; n <= 4; ++n) {
        long m = matched[n - 1], t = total[n - 1];
        double p;
        if (t == 0) {
            p = 1.0;  // no n-grams of this order in the corpus
        } else if (m == 0) {
            if (n == 1) return 0.0;  // no unigram overlap, BLEU is 0
            p = double(m + 1) / double(t + 1);
        } else {
            p = double(m) / double(t);
        }
        log_prec += 0.25 * std::log(p);
    }
    double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(hyp_len));
    return bp * std::exp(log_prec);
}

}  // namespace alignlab
