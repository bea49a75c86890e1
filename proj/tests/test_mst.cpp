#include <doctest.h>

#include <cmath>

#include "mtl/mst.hpp"
#include "mtl/rng.hpp"
#include "oracles.hpp"

using namespace mtl;
using tasks::mst_decode;
using tasks::RootPolicy;

namespace {

std::vector<std::vector<Real>> random_scores(int n, Rng& rng) {
    std::vector<std::vector<Real>> s(static_cast<std::size_t>(n),
                                     std::vector<Real>(static_cast<std::size_t>(n) + 1));
    for (auto& row : s)
        for (auto& v : row) v = rng.uniform(-5, 5);
    return s;
}

}  // namespace

TEST_CASE("single token attaches to root") {
    std::vector<std::vector<Real>> s = {{1.0, 0.0}};
    CHECK(mst_decode(s, RootPolicy::Any) == std::vector<int>{0});
    CHECK(mst_decode(s, RootPolicy::Single) == std::vector<int>{0});
}

TEST_CASE("greedy cycle is broken in favor of the max-weight tree") {
    // two tokens each preferring the other; greedy argmax picks 1<-2, 2<-1
    std::vector<std::vector<Real>> s = {
        {0.0, 0.0, 10.0},  // token 1: root 0, head=2 scores 10
        {1.0, 10.0, 0.0},  // token 2: root 1, head=1 scores 10
    };
    auto heads = mst_decode(s, RootPolicy::Any);
    CHECK(tasks::is_arborescence(heads));
    auto brute = oracle::max_arborescence_brute(s, false);
    CHECK(tasks::tree_weight(s, heads) == doctest::Approx(brute.weight).epsilon(1e-12));
    CHECK(heads == brute.heads);
    // the greedy assignment would be cyclic
    CHECK(heads != std::vector<int>{2, 1});
}

TEST_CASE("500 random 5-token instances match the brute-force oracle (both root policies)") {
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        auto s = random_scores(5, rng);

        auto any = mst_decode(s, RootPolicy::Any);
        CHECK(tasks::is_arborescence(any));
        auto brute_any = oracle::max_arborescence_brute(s, false);
        CHECK(tasks::tree_weight(s, any) == doctest::Approx(brute_any.weight).epsilon(1e-9));

        auto single = mst_decode(s, RootPolicy::Single);
        CHECK(tasks::is_arborescence(single));
        int roots = 0;
        for (int h : single)
            if (h == 0) ++roots;
        CHECK(roots == 1);
        auto brute_single = oracle::max_arborescence_brute(s, true);
        CHECK(tasks::tree_weight(s, single) == doctest::Approx(brute_single.weight).epsilon(1e-9));
    }
}

TEST_CASE("brute-force equivalence on all sizes n <= 4") {
    Rng rng(7);
    for (int n = 1; n <= 4; ++n) {
        for (int trial = 0; trial < 100; ++trial) {
            auto s = random_scores(n, rng);
            auto heads = mst_decode(s, RootPolicy::Any);
            auto brute = oracle::max_arborescence_brute(s, false);
            CHECK(tasks::tree_weight(s, heads) == doctest::Approx(brute.weight).epsilon(1e-9));
        }
    }
}

TEST_CASE("adversarial nested cycles") {
    // three tokens forming a 3-cycle with strong internal edges
    std::vector<std::vector<Real>> s = {
        {0.1, 0.0, 9.0, 0.0},
        {0.2, 0.0, 0.0, 9.0},
        {0.3, 9.0, 0.0, 0.0},
    };
    auto heads = mst_decode(s, RootPolicy::Any);
    CHECK(tasks::is_arborescence(heads));
    auto brute = oracle::max_arborescence_brute(s, false);
    CHECK(tasks::tree_weight(s, heads) == doctest::Approx(brute.weight).epsilon(1e-12));

    // two interlocked 2-cycles
    std::vector<std::vector<Real>> s2 = {
        {0.0, 0.0, 8.0, 0.1, 0.0},
        {0.5, 8.0, 0.0, 0.0, 0.0},
        {0.0, 0.1, 0.0, 0.0, 8.0},
        {0.0, 0.0, 0.0, 8.0, 0.0},
    };
    auto heads2 = mst_decode(s2, RootPolicy::Any);
    CHECK(tasks::is_arborescence(heads2));
    auto brute2 = oracle::max_arborescence_brute(s2, false);
    CHECK(tasks::tree_weight(s2, heads2) == doctest::Approx(brute2.weight).epsilon(1e-12));
}

TEST_CASE("adding a constant to every score never changes the decoded tree") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_scores(4, rng);
        auto base = mst_decode(s, RootPolicy::Single);
        auto shifted = s;
        Real c = rng.uniform(-100, 100);
        for (auto& row : shifted)
            for (auto& v : row) v += c;
        CHECK(mst_decode(shifted, RootPolicy::Single) == base);
        CHECK(mst_decode(shifted, RootPolicy::Any) == mst_decode(s, RootPolicy::Any));
    }
}

TEST_CASE("non-finite scores and malformed rows rejected") {
    std::vector<std::vector<Real>> bad = {{0.0, std::nan("")}};
    CHECK_THROWS_AS(mst_decode(bad, RootPolicy::Any), NumericError);
    std::vector<std::vector<Real>> wrong = {{0.0, 1.0, 2.0}};
    CHECK_THROWS_AS(mst_decode(wrong, RootPolicy::Any), ShapeError);
    CHECK_THROWS_AS(mst_decode({}, RootPolicy::Any), ShapeError);
}
