#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "metrics_oracle.hpp"
#include "rpra/metrics.hpp"
#include "rpra/rng.hpp"

using namespace rpra;

namespace {

std::vector<ScoreRecord> make_records(const std::vector<double>& bona,
                                      const std::vector<double>& spoof) {
    std::vector<ScoreRecord> r;
    int id = 0;
    for (double s : bona) r.push_back({"b" + std::to_string(id++), Label::bonafide, s});
    for (double s : spoof) r.push_back({"s" + std::to_string(id++), Label::spoof, s});
    return r;
}

std::vector<ScoreRecord> random_records(Rng& rng, int n_bona, int n_spoof, double sep) {
    std::vector<ScoreRecord> r;
    for (int i = 0; i < n_bona; ++i)
        r.push_back({"b" + std::to_string(i), Label::bonafide, rng.normal(sep, 1.0)});
    for (int i = 0; i < n_spoof; ++i)
        r.push_back({"s" + std::to_string(i), Label::spoof, rng.normal(0.0, 1.0)});
    return r;
}

}  // namespace

TEST_CASE("eer on hand-separable sets") {
    CHECK(eer(make_records({0.9, 0.8, 0.7}, {0.6, 0.5, 0.4})).eer == doctest::Approx(0.0));
    CHECK(eer(make_records({0.8, 0.4}, {0.6, 0.2})).eer == doctest::Approx(0.5));
    CHECK(eer(make_records({0.2}, {0.8})).eer == doctest::Approx(1.0));
}

TEST_CASE("eer requires both classes") {
    CHECK_THROWS_AS(eer(make_records({0.5}, {})), InvalidInput);
    CHECK_THROWS_AS(eer(make_records({}, {0.5})), InvalidInput);
}

TEST_CASE("eer matches the brute-force oracle on random sets") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const int nb = 2 + static_cast<int>(rng.uniform_int(40));
        const int ns = 2 + static_cast<int>(rng.uniform_int(40));
        const auto recs = random_records(rng, nb, ns, rng.uniform(0.0, 3.0));
        const EerResult fast = eer(recs);
        const EerResult slow = rpra::testing::eer_bruteforce(recs);
        CHECK(std::abs(fast.eer - slow.eer) <= 1e-12);
        CHECK(fast.eer >= 0.0);
        CHECK(fast.eer <= 1.0);
    }
}

TEST_CASE("eer is invariant under strictly increasing transforms") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        auto recs = random_records(rng, 20, 25, 1.0);
        const double base = eer(recs).eer;
        const double a = rng.uniform(0.5, 3.0);
        auto mapped = recs;
        for (auto& r : mapped) r.score = std::tanh(a * r.score) + 3.0 * r.score;
        CHECK(std::abs(eer(mapped).eer - base) <= 1e-12);
    }
}

TEST_CASE("label swap complements the eer") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        auto recs = random_records(rng, 15, 18, rng.uniform(0.0, 2.0));
        auto swapped = recs;
        for (auto& r : swapped)
            r.label = r.label == Label::bonafide ? Label::spoof : Label::bonafide;
        const double e1 = rpra::testing::eer_bruteforce(recs).eer;
        const double e2 = rpra::testing::eer_bruteforce(swapped).eer;
        CHECK(std::abs(e2 - (1.0 - e1)) <= 1e-12);
        CHECK(std::abs(eer(swapped).eer - (1.0 - eer(recs).eer)) <= 1e-12);
    }
}

TEST_CASE("min t-dcf basics") {
    TdcfCosts costs;
    CHECK(min_tdcf(make_records({0.9, 0.8}, {0.2, 0.1}), costs) == doctest::Approx(0.0));

    // always-accept / always-reject bound the normalized minimum by 1
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const auto recs = random_records(rng, 10, 12, rng.uniform(0.0, 2.0));
        const double v = min_tdcf(recs, costs);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("min t-dcf equals brute force with random costs") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto recs = random_records(rng, 8 + static_cast<int>(rng.uniform_int(20)),
                                         8 + static_cast<int>(rng.uniform_int(20)),
                                         rng.uniform(0.0, 2.5));
        TdcfCosts c;
        c.p_spoof = rng.uniform(0.01, 0.3);
        c.p_target = (1.0 - c.p_spoof) * 0.99;
        c.p_nontarget = (1.0 - c.p_spoof) * 0.01;
        c.c_fa_cm = rng.uniform(1.0, 20.0);
        c.c_miss_cm = rng.uniform(0.5, 5.0);
        c.p_miss_asv = rng.uniform(0.0, 0.2);
        c.p_fa_asv = rng.uniform(0.0, 0.05);
        c.p_fa_spoof_asv = rng.uniform(0.05, 0.9);
        CHECK(std::abs(min_tdcf(recs, c) - rpra::testing::min_tdcf_bruteforce(recs, c)) <= 1e-12);
    }
}

TEST_CASE("min t-dcf improves (weakly) with better separation") {
    Rng rng(37);
    TdcfCosts costs;
    auto recs = random_records(rng, 20, 20, 0.5);
    const double before = min_tdcf(recs, costs);
    for (auto& r : recs)
        if (r.label == Label::bonafide) r.score += 2.0;
    CHECK(min_tdcf(recs, costs) <= before + 1e-12);
}

TEST_CASE("invalid cost models are rejected") {
    TdcfCosts c;
    c.p_miss_asv = 1.5;
    CHECK_THROWS_AS(min_tdcf(make_records({1.0}, {0.0}), c), InvalidInput);
    TdcfCosts c2;
    c2.c_fa_cm = 0.0;
    CHECK_THROWS_AS(min_tdcf(make_records({1.0}, {0.0}), c2), InvalidInput);
    TdcfCosts c3;
    c3.p_spoof = 0.5;  // priors no longer sum to 1
    CHECK_THROWS_AS(min_tdcf(make_records({1.0}, {0.0}), c3), InvalidInput);
}

TEST_CASE("accuracy and the >= tie convention") {
    const auto recs = make_records({0.9, 0.7}, {0.3, 0.1});
    CHECK(accuracy(recs, 0.5) == doctest::Approx(1.0));
    CHECK(accuracy(recs, 2.0) == doctest::Approx(0.5));  // everything called spoof

    auto inverted = make_records({0.1, 0.2}, {0.8, 0.9});
    CHECK(accuracy(inverted, 0.5) == doctest::Approx(0.0));

    const auto three_of_four = make_records({0.9, 0.4}, {0.3, 0.1});
    CHECK(accuracy(three_of_four, 0.5) == doctest::Approx(0.75));

    // score exactly at the threshold counts as bonafide
    const auto tie = make_records({0.5}, {0.4});
    CHECK(accuracy(tie, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("score file round trip preserves metrics") {
    Rng rng(41);
    const auto recs = random_records(rng, 30, 30, 1.3);
    const auto dir = std::filesystem::temp_directory_path() / "rpra_scores_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "scores.tsv").string();
    write_scores(path, recs);
    const auto back = read_scores(path);
    REQUIRE(back.size() == recs.size());
    CHECK(std::abs(eer(back).eer - eer(recs).eer) <= 1e-12);
    TdcfCosts costs;
    CHECK(std::abs(min_tdcf(back, costs) - min_tdcf(recs, costs)) <= 1e-12);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].utt_id == recs[i].utt_id);
        CHECK(back[i].score == recs[i].score);  // %.17g round-trips doubles
    }
}
