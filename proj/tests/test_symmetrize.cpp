#include <doctest.h>

#include "alignlab/symmetrize.hpp"

using namespace alignlab;

namespace {

AlignmentSet sure_of(std::initializer_list<std::pair<int, int>> links) {
    AlignmentSet a;
    for (auto& [s, t] : links) a.add_sure(s, t);
    return a;
}

}  // namespace

TEST_CASE("transpose swaps coordinates and is involutive") {
    auto a = sure_of({{1, 2}});
    auto t = transpose_alignment(a);
    CHECK(t == sure_of({{2, 1}}));
    CHECK(transpose_alignment(t) == a);
    CHECK(transpose_alignment(AlignmentSet{}) == AlignmentSet{});

    AlignmentSet with_possible;
    with_possible.add_sure(1, 3);
    with_possible.add_possible(2, 4);
    auto tp = transpose_alignment(with_possible);
    CHECK(tp.sure == std::set<std::pair<int, int>>{{3, 1}});
    CHECK(tp.possible == std::set<std::pair<int, int>>{{3, 1}, {4, 2}});
}

TEST_CASE("grow_diag of identical inputs is the input") {
    auto a = sure_of({{1, 1}, {2, 3}, {4, 2}});
    CHECK(grow_diag(a, a) == a);
}

TEST_CASE("grow_diag hand trace: {(1,1),(2,2)} with {(1,1),(3,2)}") {
    auto fwd = sure_of({{1, 1}, {2, 2}});
    auto rev = sure_of({{1, 1}, {3, 2}});
    auto g = grow_diag(fwd, rev);
    CHECK(g == sure_of({{1, 1}, {2, 2}, {3, 2}}));
}

TEST_CASE("grow_diag of disjoint non-adjacent inputs is empty") {
    auto fwd = sure_of({{1, 1}});
    auto rev = sure_of({{5, 5}});
    CHECK(grow_diag(fwd, rev) == AlignmentSet{});
}

TEST_CASE("grow_diag sits between intersection and union") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        AlignmentSet fwd, rev;
        for (int k = 0; k < 8; ++k) {
            fwd.add_sure(1 + int(rng.uniform_int(6)), 1 + int(rng.uniform_int(6)));
            rev.add_sure(1 + int(rng.uniform_int(6)), 1 + int(rng.uniform_int(6)));
        }
        auto inter = alignment_intersection(fwd, rev);
        auto uni = alignment_union(fwd, rev);
        auto g = grow_diag(fwd, rev);
        for (auto& l : inter.sure) CHECK(g.sure.count(l) == 1);
        for (auto& l : g.sure) CHECK(uni.sure.count(l) == 1);
        // idempotent on its own output
        CHECK(grow_diag(g, g) == g);
    }
}

TEST_CASE("intersection and union basics") {
    auto a = sure_of({{1, 1}, {2, 2}});
    auto b = sure_of({{2, 2}, {3, 3}});
    CHECK(alignment_intersection(a, b) == sure_of({{2, 2}}));
    CHECK(alignment_union(a, b) == sure_of({{1, 1}, {2, 2}, {3, 3}}));
}

TEST_CASE("vector helpers apply element-wise") {
    std::vector<AlignmentSet> fwd = {sure_of({{1, 1}, {2, 2}}), sure_of({{1, 2}})};
    std::vector<AlignmentSet> rev = {sure_of({{1, 1}, {3, 2}}), sure_of({{1, 2}})};
    auto merged = grow_diag_all(fwd, rev);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0] == sure_of({{1, 1}, {2, 2}, {3, 2}}));
    CHECK(merged[1] == sure_of({{1, 2}}));

    auto tr = transpose_all(fwd);
    CHECK(tr[1] == sure_of({{2, 1}}));
}
