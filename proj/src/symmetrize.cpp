#include "alignlab/symmetrize.hpp"

#include <algorithm>

namespace alignlab {

AlignmentSet transpose_alignment(const AlignmentSet& a) {
    AlignmentSet out;
    for (auto& [s, t] : a.sure) out.sure.insert({t, s});
    for (auto& [s, t] : a.possible) out.possible.insert({t, s});
    return out;
}

AlignmentSet alignment_intersection(const AlignmentSet& a, const AlignmentSet& b) {
    AlignmentSet out;
    for (auto& l : a.sure)
        if (b.sure.count(l)) out.add_sure(l.first, l.second);
    return out;
}

AlignmentSet alignment_union(const AlignmentSet& a, const AlignmentSet& b) {
    AlignmentSet out;
    for (auto& l : a.sure) out.add_sure(l.first, l.second);
    for (auto& l : b.sure) out.add_sure(l.first, l.second);
    return out;
}

AlignmentSet grow_diag(const AlignmentSet& fwd, const AlignmentSet& rev_transposed) {
    auto current = alignment_intersection(fwd, rev_transposed);
    auto uni = alignment_union(fwd, rev_transposed);
    std::set<int> src_aligned, tgt_aligned;
    for (auto& [s, t] : current.sure) {
        src_aligned.insert(s);
        tgt_aligned.insert(t);
    }
    bool changed = true;
    while (changed) {
        changed = false;
        // snapshot: scan current links row-major, candidates (s, t) ascending
        std::vector<std::pair<int, int>> links(current.sure.begin(), current.sure.end());
        for (auto& [s, t] : links) {
            std::vector<std::pair<int, int>> cands;
            for (int ds = -1; ds <= 1; ++ds)
                for (int dt = -1; dt <= 1; ++dt) {
                    if (ds == 0 && dt == 0) continue;
                    cands.push_back({s + ds, t + dt});
                }
            std::sort(cands.begin(), cands.end());
            for (auto& c : cands) {
                if (!uni.sure.count(c) || current.sure.count(c)) continue;
                if (!src_aligned.count(c.first) || !tgt_aligned.count(c.second)) {
                    current.add_sure(c.first, c.second);
                    src_aligned.insert(c.first);
                    tgt_aligned.insert(c.second);
                    changed = true;
                }
            }
        }
    }
    return current;
}

std::vector<AlignmentSet> transpose_all(const std::vector<AlignmentSet>& as) {
    std::vector<AlignmentSet> out;
    out.reserve(as.size());
    for (auto& a : as) out.push_back(transpose_alignment(a));
    return out;
}

std::vector<AlignmentSet> grow_diag_all(const std::vector<AlignmentSet>& fwd,
                                        const std::vector<AlignmentSet>& rev_transposed) {
    if (fwd.size() != rev_transposed.size())
        throw UsageError("grow_diag: sentence count mismatch");
    std::vector<AlignmentSet> out;
    out.reserve(fwd.size());
    for (size_t i = 0; i < fwd.size(); ++i)
        out.push_back(grow_diag(fwd[i], rev_transposed[i]));
    return out;
}

}  // namespace alignlab
