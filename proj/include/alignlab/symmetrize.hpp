#pragma once

#include "alignlab/corpus.hpp"

namespace alignlab {

/// Swap (s, t) -> (t, s) on both link sets; involutive.
AlignmentSet transpose_alignment(const AlignmentSet& a);

/// Grow-diag (without final): start from the intersection of sure links,
/// then repeatedly add union links 8-adjacent to a current link whose
/// source or target word is still unaligned, scanning current links
/// row-major and candidates in (s, t) order, until a fixpoint.
AlignmentSet grow_diag(const AlignmentSet& fwd, const AlignmentSet& rev_transposed);

AlignmentSet alignment_intersection(const AlignmentSet& a, const AlignmentSet& b);
AlignmentSet alignment_union(const AlignmentSet& a, const AlignmentSet& b);

std::vector<AlignmentSet> transpose_all(const std::vector<AlignmentSet>& as);
std::vector<AlignmentSet> grow_diag_all(const std::vector<AlignmentSet>& fwd,
                                        const std::vector<AlignmentSet>& rev_transposed);

}  // namespace alignlab
