#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "alignlab/guided_decode.hpp"

using namespace alignlab;
namespace fs = std::filesystem;

namespace {

TransformerModel small_model(uint64_t seed = 2) {
    Hyper hp;
    hp.layers = 2;
    hp.heads = 2;
    hp.d_model = 16;
    hp.d_ff = 32;
    hp.dropout = 0.f;
    hp.src_vocab = 12;
    hp.tgt_vocab = 12;
    Rng rng(seed);
    return TransformerModel::init(hp, rng);
}

// Stub probes with fixed behavior.
class ConstProbe : public AlignProbe {
  public:
    explicit ConstProbe(int pos) : pos_(pos) {}
    int align_last(const std::vector<int>&, const std::vector<int>&) override { return pos_; }

  private:
    int pos_;
};

Constraint make_constraint(int start, int end, std::vector<int> toks) {
    Constraint c;
    c.start = start;
    c.end = end;
    c.tgt_tokens = std::move(toks);
    return c;
}

}  // namespace

TEST_CASE("constraint validation") {
    CHECK_NOTHROW(validate_constraints({make_constraint(1, 3, {5})}, 4));
    CHECK_THROWS_AS(validate_constraints({make_constraint(0, 1, {5})}, 4), UsageError);
    CHECK_THROWS_AS(validate_constraints({make_constraint(3, 5, {5})}, 4), UsageError);
    CHECK_THROWS_AS(validate_constraints({make_constraint(2, 1, {5})}, 4), UsageError);
    CHECK_THROWS_AS(validate_constraints({make_constraint(1, 4, {5})}, 4), UsageError);  // span > 3
    CHECK_THROWS_AS(validate_constraints({make_constraint(1, 1, {})}, 4), UsageError);
    CHECK_THROWS_AS(
        validate_constraints({make_constraint(1, 2, {5}), make_constraint(2, 3, {6})}, 4),
        UsageError);  // overlap
    CHECK_NOTHROW(
        validate_constraints({make_constraint(1, 2, {5}), make_constraint(3, 4, {6})}, 4));
}

TEST_CASE("no constraints reduce to plain greedy decoding") {
    auto m = small_model(5);
    std::vector<int> src{4, 5, 6, 7};
    auto plain = greedy_decode(m, src, 12).tokens;
    CHECK(guided_greedy_decode(m, nullptr, src, {}, 12) == plain);
    ConstProbe probe(1);
    CHECK(guided_greedy_decode(m, &probe, src, {}, 12) == plain);
}

TEST_CASE("probe that never hits a span leaves the output unchanged") {
    auto m = small_model(6);
    std::vector<int> src{4, 5, 6, 7};
    auto plain = greedy_decode(m, src, 12).tokens;
    ConstProbe far(4);  // constraints sit on positions 1-2
    auto out = guided_greedy_decode(m, &far, src, {make_constraint(1, 2, {9})}, 12);
    CHECK(out == plain);
}

TEST_CASE("stub probe aligning into the span rewrites the first token") {
    auto m = small_model(7);
    std::vector<int> src{4, 5, 6, 7};
    ConstProbe probe(1);
    auto out = guided_greedy_decode(m, &probe, src, {make_constraint(1, 1, {11, 10})}, 12);
    REQUIRE(!out.empty());
    CHECK(out[0] == 11);
    REQUIRE(out.size() >= 2);
    CHECK(out[1] == 10);
}

TEST_CASE("each constraint fires at most once") {
    auto m = small_model(7);
    std::vector<int> src{4, 5, 6, 7};
    ConstProbe probe(1);  // every generated token aligns to position 1
    auto out = guided_greedy_decode(m, &probe, src, {make_constraint(1, 1, {11})}, 10);
    // the first generated token is revised; later tokens are never revised
    // again even though the probe keeps pointing into span 1
    REQUIRE(!out.empty());
    CHECK(out[0] == 11);
    auto again = guided_greedy_decode(m, &probe, src, {make_constraint(1, 1, {11})}, 10);
    CHECK(out == again);
}

TEST_CASE("output length respects the splice bound") {
    auto m = small_model(9);
    std::vector<int> src{4, 5, 6, 7, 8};
    std::vector<Constraint> cs = {make_constraint(1, 1, {9, 10, 11}),
                                  make_constraint(3, 3, {8, 7})};
    ConstProbe probe(1);
    int max_len = 6;
    auto out = guided_greedy_decode(m, &probe, src, cs, max_len);
    CHECK(int(out.size()) <= max_len + (3 - 1) + (2 - 1));
}

TEST_CASE("constraint records round-trip through files") {
    auto path = (fs::temp_directory_path() /
                 ("alignlab-cons-" + std::to_string(::getpid()) + ".tsv"))
                    .string();
    std::vector<ConstraintRecord> recs(2);
    recs[0].sent_id = 1;
    recs[0].start = 2;
    recs[0].end = 3;
    recs[0].tgt_tokens = {"t4", "t5"};
    recs[1].sent_id = 3;
    recs[1].start = 1;
    recs[1].end = 1;
    recs[1].tgt_tokens = {"t9"};
    write_constraints(recs, path);
    auto back = read_constraints(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].sent_id == 1);
    CHECK(back[0].start == 2);
    CHECK(back[0].end == 3);
    CHECK(back[0].tgt_tokens == recs[0].tgt_tokens);
    CHECK(back[1].sent_id == 3);

    {
        std::ofstream bad(path);
        bad << "1\tnonsense\tx\n";
    }
    CHECK_THROWS_AS(read_constraints(path), FormatError);
    fs::remove(path);
}

TEST_CASE("extract_constraints yields valid, deterministic constraints") {
    std::vector<std::vector<std::string>> src = {{"a", "b", "c", "d"}, {"e", "f"}};
    std::vector<std::vector<std::string>> tgt = {{"A", "B", "C", "D"}, {"E", "F"}};
    std::vector<AlignmentSet> gold(2);
    for (int k = 1; k <= 4; ++k) gold[0].add_sure(k, k);
    gold[1].add_sure(1, 1);
    gold[1].add_sure(2, 2);

    Rng r1(3), r2(3);
    auto a = extract_constraints(src, tgt, gold, {}, 3, 3, r1);
    auto b = extract_constraints(src, tgt, gold, {}, 3, 3, r2);
    REQUIRE(!a.empty());
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sent_id == b[i].sent_id);
        CHECK(a[i].start == b[i].start);
        CHECK(a[i].tgt_tokens == b[i].tgt_tokens);
        CHECK(a[i].end - a[i].start + 1 <= 3);
        CHECK(a[i].start >= 1);
        CHECK(a[i].end <= int(src[size_t(a[i].sent_id - 1)].size()));
        CHECK(!a[i].tgt_tokens.empty());
    }
    // per-sentence cap and disjointness
    for (int sent = 1; sent <= 2; ++sent) {
        std::vector<std::pair<int, int>> spans;
        for (auto& r : a)
            if (r.sent_id == sent) spans.push_back({r.start, r.end});
        CHECK(spans.size() <= 3);
        std::sort(spans.begin(), spans.end());
        for (size_t i = 1; i < spans.size(); ++i) CHECK(spans[i].first > spans[i - 1].second);
    }

    // stop words suppress their spans
    auto none = extract_constraints(src, tgt, gold, {"a", "b", "c", "d", "e", "f"}, 3, 1, r1);
    CHECK(none.empty());
}
