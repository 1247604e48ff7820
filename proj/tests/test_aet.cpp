#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "alignlab/aet.hpp"

using namespace alignlab;
namespace fs = std::filesystem;

namespace {

TransformerModel small_base(uint64_t seed = 2) {
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

AetModel small_aet(uint64_t seed = 3) {
    Rng rng(seed);
    return AetModel::init(small_base(seed), 2, rng);
}

// Double-precision mirror of aet_score_graph + aet_loss for the
// finite-difference oracle.
double aet_loss_double(const AetModel& m, const Mat& h, const Mat& z, const Mat& ref) {
    int heads = m.base.hp.heads, dk = m.base.hp.d_k();
    int y = z.rows, x = h.rows, d = z.cols;
    std::vector<double> s(size_t(y) * x, 0.0);
    for (int n = 0; n < heads; ++n) {
        const auto& gq = m.gq[size_t(n)]->data;
        const auto& gk = m.gk[size_t(n)]->data;
        // q = z gq, k = h gk
        std::vector<double> q(size_t(y) * dk, 0.0), k(size_t(x) * dk, 0.0);
        for (int i = 0; i < y; ++i)
            for (int c = 0; c < d; ++c)
                for (int j = 0; j < dk; ++j)
                    q[size_t(i) * dk + j] += double(z.at(i, c)) * double(gq[size_t(c) * dk + j]);
        for (int i = 0; i < x; ++i)
            for (int c = 0; c < d; ++c)
                for (int j = 0; j < dk; ++j)
                    k[size_t(i) * dk + j] += double(h.at(i, c)) * double(gk[size_t(c) * dk + j]);
        for (int i = 0; i < y; ++i) {
            std::vector<double> row(static_cast<size_t>(x));
            double mx = -1e300;
            for (int j = 0; j < x; ++j) {
                double dot = 0.0;
                for (int c = 0; c < dk; ++c) dot += q[size_t(i) * dk + c] * k[size_t(j) * dk + c];
                row[size_t(j)] = dot / std::sqrt(double(dk));
                mx = std::max(mx, row[size_t(j)]);
            }
            double denom = 0.0;
            for (int j = 0; j < x; ++j) denom += std::exp(row[size_t(j)] - mx);
            for (int j = 0; j < x; ++j)
                s[size_t(i) * x + j] += std::exp(row[size_t(j)] - mx) / denom / heads;
        }
    }
    double total = 0.0;
    for (size_t i = 0; i < s.size(); ++i) {
        double w = ref.v[i];
        if (w == 0.0) continue;
        total += w * std::log(std::max(s[i], 1e-9));
    }
    return -total / double(ref.rows);
}

}  // namespace

TEST_CASE("normalize_reference: uniform, zero and one-hot rows") {
    AlignmentSet a;
    a.add_sure(1, 1);
    a.add_sure(3, 1);  // target 1 aligned to sources {1,3}
    a.add_sure(2, 3);  // target 3 one link, target 2 unaligned
    auto ref = normalize_reference(a, 3, 3);
    CHECK(ref.at(0, 0) == doctest::Approx(0.5f));
    CHECK(ref.at(0, 1) == 0.f);
    CHECK(ref.at(0, 2) == doctest::Approx(0.5f));
    for (int j = 0; j < 3; ++j) CHECK(ref.at(1, j) == 0.f);
    CHECK(ref.at(2, 1) == doctest::Approx(1.f));

    AlignmentSet oob;
    oob.add_sure(4, 1);
    CHECK_THROWS_AS(normalize_reference(oob, 3, 3), IndexError);
    AlignmentSet oob2;
    oob2.add_sure(1, 4);
    CHECK_THROWS_AS(normalize_reference(oob2, 3, 3), IndexError);
}

TEST_CASE("aet_loss closed forms") {
    auto s = Tensor::from_data({1, 2}, {0.5f, 0.5f});
    Mat ref(1, 2);
    ref.at(0, 0) = 1.f;
    auto l = aet_loss(s, ref);
    CHECK(l->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    Mat zeros(1, 2);
    CHECK(aet_loss(s, zeros)->data[0] == 0.f);

    auto s2 = Tensor::from_data({1, 2}, {0.999999f, 1e-6f});
    CHECK(aet_loss(s2, ref)->data[0] == doctest::Approx(0.0).epsilon(1e-5));

    Mat bad(2, 2);
    CHECK_THROWS_AS(aet_loss(s, bad), DimError);
}

TEST_CASE("aet_forward rows are probability vectors, one per target token") {
    auto m = small_aet();
    std::vector<int> src{4, 5, 6, 7};
    std::vector<int> tgt{8, 9, 10};
    auto s = aet_forward(m, src, tgt);
    REQUIRE(s.rows == 3);
    REQUIRE(s.cols == 4);
    for (int i = 0; i < s.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < s.cols; ++j) {
            CHECK(s.at(i, j) >= 0.f);
            sum += s.at(i, j);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
    auto a = induce_aet(m, src, tgt);
    CHECK(a.sure.size() == tgt.size());
}

TEST_CASE("module parameter count is 2 N d_model d_k") {
    auto m = small_aet();
    CHECK(m.module_parameter_count() ==
          size_t(2) * 2 * 16 * 8);  // heads=2, d_model=16, d_k=8
    CHECK(m.module_parameters().size() == 4);
    Rng rng(1);
    CHECK_THROWS_AS(AetModel::init(small_base(), 0, rng), UsageError);
    CHECK_THROWS_AS(AetModel::init(small_base(), 3, rng), UsageError);
}

TEST_CASE("gradient of the alignment loss matches central differences") {
    auto m = small_aet(9);
    Rng rng(13);
    Mat h(3, 16), z(2, 16);
    for (auto& v : h.v) v = float(rng.uniform() - 0.5);
    for (auto& v : z.v) v = float(rng.uniform() - 0.5);
    Mat ref(2, 3);
    ref.at(0, 1) = 1.f;
    ref.at(1, 0) = 0.5f;
    ref.at(1, 2) = 0.5f;

    for (auto& p : m.module_parameters()) p->zero_grad();
    auto loss = aet_loss(aet_score_graph(m, h, z), ref);
    backward(loss);

    const double step = 1e-3;
    double max_rel = 0.0;
    for (auto& p : m.module_parameters()) {
        REQUIRE(p->grad.size() == p->numel());
        for (size_t e = 0; e < p->numel(); e += 7) {  // sample every 7th entry
            float orig = p->data[e];
            p->data[e] = float(double(orig) + step);
            double fp = aet_loss_double(m, h, z, ref);
            p->data[e] = float(double(orig) - step);
            double fm = aet_loss_double(m, h, z, ref);
            p->data[e] = orig;
            double fd = (fp - fm) / (2.0 * step);
            double ad = double(p->grad[e]);
            double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("train_aet freezes the base and learns one-hot labels") {
    auto m = small_aet(21);
    auto tmp = fs::temp_directory_path() /
               ("alignlab-aet-" + std::to_string(::getpid()) + ".bin");
    save_model(m.base, tmp.string());
    auto before = fnv1a64_file(tmp.string());

    std::vector<ParallelPair> corpus;
    std::vector<AlignmentSet> labels;
    ParallelPair p;
    p.src = {4, 5, 6};
    p.tgt = {7, 8, 9};
    AlignmentSet lab;
    lab.add_sure(3, 1);
    lab.add_sure(1, 2);
    lab.add_sure(2, 3);
    corpus.push_back(p);
    labels.push_back(lab);

    AetTrainConfig cfg;
    cfg.max_updates = 300;
    cfg.batch_sentences = 1;
    cfg.lr = 1e-2f;
    auto stats = train_aet(m, corpus, labels, cfg);
    CHECK(stats.step_loss.back() < stats.step_loss.front());
    CHECK(induce_aet(m, p.src, p.tgt) == lab);  // overfit oracle

    save_model(m.base, tmp.string());
    CHECK(fnv1a64_file(tmp.string()) == before);  // frozen base, bit-identical
    fs::remove(tmp);
}

TEST_CASE("all-zero labels produce zero gradient and no movement") {
    auto m = small_aet(31);
    std::vector<std::vector<float>> before;
    for (auto& p : m.module_parameters()) before.push_back(p->data);
    ParallelPair p;
    p.src = {4, 5};
    p.tgt = {6, 7};
    AetTrainConfig cfg;
    cfg.max_updates = 5;
    cfg.batch_sentences = 1;
    train_aet(m, {p}, {AlignmentSet{}}, cfg);
    auto params = m.module_parameters();
    for (size_t i = 0; i < params.size(); ++i) CHECK(params[i]->data == before[i]);
}

TEST_CASE("train_aet validates label count") {
    auto m = small_aet();
    ParallelPair p;
    p.src = {4};
    p.tgt = {5};
    AetTrainConfig cfg;
    CHECK_THROWS_AS(train_aet(m, {p}, {}, cfg), UsageError);
}

TEST_CASE("aet checkpoint round-trip") {
    auto m = small_aet(41);
    auto tmp = fs::temp_directory_path() /
               ("alignlab-aetckpt-" + std::to_string(::getpid()) + ".bin");
    save_aet(m, tmp.string());
    CHECK(checkpoint_is_aet(tmp.string()));
    auto m2 = load_aet(tmp.string());
    CHECK(m2.l_b == m.l_b);
    for (size_t n = 0; n < m.gq.size(); ++n) {
        CHECK(m2.gq[n]->data == m.gq[n]->data);
        CHECK(m2.gk[n]->data == m.gk[n]->data);
    }
    auto s1 = aet_forward(m, {4, 5, 6}, {7, 8});
    auto s2 = aet_forward(m2, {4, 5, 6}, {7, 8});
    CHECK(s1.v == s2.v);

    // a plain base checkpoint is not an AET checkpoint
    auto base_tmp = fs::temp_directory_path() /
                    ("alignlab-base-" + std::to_string(::getpid()) + ".bin");
    save_model(m.base, base_tmp.string());
    CHECK_FALSE(checkpoint_is_aet(base_tmp.string()));
    CHECK_THROWS_AS(load_aet(base_tmp.string()), FormatError);
    fs::remove(tmp);
    fs::remove(base_tmp);
}
