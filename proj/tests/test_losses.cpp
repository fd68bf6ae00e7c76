#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "rpra/losses.hpp"

using namespace rpra;
using rpra::testing::max_grad_rel_err;
using rpra::testing::random_mat;

namespace {

double garl_value_full(const std::vector<std::pair<Mat, Mat>>& real_pairs) {
    ad::Tape t(false);
    std::vector<losses::GarlTerm> terms;
    for (const auto& [target, recon] : real_pairs)
        terms.push_back({t.constant(recon), target, {}});
    return losses::garl(t, terms).val()(0, 0);
}

}  // namespace

TEST_CASE("garl unit values") {
    Mat x(1, 2), xr(1, 2);
    x << 1.0, 2.0;
    xr << 1.0, 1.0;
    CHECK(garl_value_full({{x, xr}}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(garl_value_full({{x, x}}) == doctest::Approx(0.0));

    // two real samples with per-sample MSE 0.5 and 1.5
    Mat y(1, 2), yr(1, 2);
    y << 0.0, 0.0;
    yr << 1.0, std::sqrt(2.0);
    CHECK(garl_value_full({{x, xr}, {y, yr}}) == doctest::Approx(1.0).epsilon(1e-9));

    // masked-row selection
    ad::Tape t(false);
    Mat target = Mat::Zero(4, 2);
    Mat recon = Mat::Ones(4, 2);
    losses::GarlTerm term{t.constant(recon), target, {1, 3}};
    CHECK(losses::garl(t, {term}).val()(0, 0) == doctest::Approx(1.0));

    // empty real set contributes zero
    ad::Tape t2(false);
    CHECK(losses::garl(t2, {}).val()(0, 0) == 0.0);
}

TEST_CASE("garl non-negative, zero iff exact") {
    Rng rng(61);
    const Mat target = random_mat(5, 8, rng);
    Mat recon = target;
    CHECK(garl_value_full({{target, recon}}) == 0.0);
    recon(2, 3) += 1e-3;
    CHECK(garl_value_full({{target, recon}}) > 0.0);
}

TEST_CASE("dispersal unit values") {
    const double m = 2.0;
    {
        Mat e(3, 2);
        e << 0, 0, 0, 0, 3, 4;  // two identical reals, fake at distance 5
        CHECK(losses::dispersal_value(e, {1, 1, 0}, m) == doctest::Approx(0.0));
    }
    {
        Mat e(3, 2);
        e << 0, 0, 0, 2, 0, 1;  // reals at distance 2, fake 1 away from each
        CHECK(losses::dispersal_value(e, {1, 1, 0}, m) == doctest::Approx(3.0).epsilon(1e-12));
    }
    {
        Mat e(3, 2);  // all-real batch: hinge term is an empty sum
        e << 0, 0, 0, 2, 0, 4;
        const double mean_rr = (2.0 + 4.0 + 2.0) / 3.0;
        CHECK(losses::dispersal_value(e, {1, 1, 1}, m) == doctest::Approx(mean_rr).epsilon(1e-12));
    }
    {
        Mat e(2, 2);  // all-fake batch: both terms empty
        e << 0, 0, 1, 1;
        CHECK(losses::dispersal_value(e, {0, 0}, m) == doctest::Approx(0.0));
    }
}

TEST_CASE("dispersal is invariant under rigid motions") {
    Rng rng(62);
    const int b = 10, d = 6;
    const Mat emb = random_mat(b, d, rng);
    const std::vector<std::uint8_t> labels = {1, 0, 1, 1, 0, 0, 1, 0, 1, 0};
    const double base = losses::dispersal_value(emb, labels, 1.5);

    // random orthogonal matrix via QR
    const Mat q = Eigen::HouseholderQR<Mat>(random_mat(d, d, rng)).householderQ();
    const Mat shift = random_mat(1, d, rng).replicate(b, 1);
    const Mat moved = (emb * q) + shift;
    CHECK(std::abs(losses::dispersal_value(moved, labels, 1.5) - base) <= 1e-9);
}

TEST_CASE("dispersal hinge vanishes beyond the margin and is monotone") {
    Mat e(2, 2);
    e << 0, 0, 10, 0;  // one real, one fake, distance 10
    CHECK(losses::dispersal_value(e, {1, 0}, 2.0) == doctest::Approx(0.0));

    // moving the fake further away never increases the loss
    Mat close(2, 2);
    close << 0, 0, 0.5, 0;
    double prev = losses::dispersal_value(close, {1, 0}, 2.0);
    for (double dist = 0.75; dist <= 3.0; dist += 0.25) {
        Mat cur(2, 2);
        cur << 0, 0, dist, 0;
        const double v = losses::dispersal_value(cur, {1, 0}, 2.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("mdel aggregates per-layer losses") {
    // layer losses [3, 1, 2, 2] -> 2.0, via crafted single-pair batches
    auto layer_with_loss = [](double target) {
        Mat e(2, 2);  // one real-real pair at distance `target`
        e << 0, 0, target, 0;
        return e;
    };
    const std::vector<Mat> layers = {layer_with_loss(3), layer_with_loss(1), layer_with_loss(2),
                                     layer_with_loss(2)};
    CHECK(losses::mdel_value(layers, {1, 1}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));

    // single probe layer equals the dispersal loss itself
    CHECK(losses::mdel_value({layers[0]}, {1, 1}, 1.0) ==
          doctest::Approx(losses::dispersal_value(layers[0], {1, 1}, 1.0)));

    // identical layers: mdel equals any one of them
    const std::vector<Mat> same = {layers[1], layers[1], layers[1]};
    CHECK(losses::mdel_value(same, {1, 1}, 1.0) ==
          doctest::Approx(losses::dispersal_value(layers[1], {1, 1}, 1.0)));

    ad::Tape t(false);
    CHECK_THROWS_AS(losses::mdel(t, {}, {1, 1}, 1.0), InvalidInput);
}

TEST_CASE("cross entropy unit values") {
    Mat logits(1, 2);
    logits << 0.0, 0.0;
    CHECK(losses::cross_entropy_value(logits, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(losses::cross_entropy_value(logits, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    Mat sat(1, 2);
    sat << 0.0, 30.0;
    CHECK(losses::cross_entropy_value(sat, {1}) < 1e-12);

    Mat batch(2, 2);
    batch << 0.0, 0.0, 0.0, 30.0;
    CHECK(losses::cross_entropy_value(batch, {0, 1}) ==
          doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("total loss weighting") {
    LossWeights w;  // defaults are the best sweep row
    CHECK(w.lambda_garl == 0.01);
    CHECK(w.lambda_mdel == 0.1);
    CHECK(losses::total_value(1.0, 2.0, 3.0, w) == doctest::Approx(1.32).epsilon(1e-12));

    LossWeights zero;
    zero.lambda_garl = 0.0;
    zero.lambda_mdel = 0.0;
    CHECK(losses::total_value(0.7, 9.0, 9.0, zero) == doctest::Approx(0.7));

    CHECK_THROWS_AS(losses::total_value(std::nan(""), 0, 0, w), TrainingDiverged);
    LossWeights bad;
    bad.margin = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(63);

    SUBCASE("garl w.r.t. reconstruction") {
        ad::Parameter recon("recon", random_mat(6, 10, rng));
        const Mat target = random_mat(6, 10, rng);
        auto eval = [&](bool g) {
            ad::Tape t(g);
            ad::Value loss = losses::garl(t, {{t.param(recon), target, {0, 2, 5}}});
            if (g) t.backward(loss);
            return loss.val()(0, 0);
        };
        CHECK(max_grad_rel_err({&recon}, eval, 25, rng) <= 1e-6);
    }

    SUBCASE("mdel w.r.t. embeddings") {
        ad::Parameter e1("e1", random_mat(6, 4, rng));
        ad::Parameter e2("e2", random_mat(6, 4, rng));
        const std::vector<std::uint8_t> labels = {1, 0, 1, 0, 1, 0};
        auto eval = [&](bool g) {
            ad::Tape t(g);
            ad::Value loss = losses::mdel(t, {t.param(e1), t.param(e2)}, labels, 1.2);
            if (g) t.backward(loss);
            return loss.val()(0, 0);
        };
        CHECK(max_grad_rel_err({&e1, &e2}, eval, 25, rng) <= 1e-6);
    }

    SUBCASE("total through all components") {
        ad::Parameter logits("logits", random_mat(4, 2, rng));
        ad::Parameter recon("recon", random_mat(3, 8, rng));
        ad::Parameter emb("emb", random_mat(4, 5, rng));
        const Mat target = random_mat(3, 8, rng);
        const std::vector<int> cls = {1, 0, 1, 0};
        const std::vector<std::uint8_t> lab = {1, 0, 1, 0};
        LossWeights w;
        auto eval = [&](bool g) {
            ad::Tape t(g);
            ad::Value ce = losses::cross_entropy(t.param(logits), cls);
            ad::Value gr = losses::garl(t, {{t.param(recon), target, {}}});
            ad::Value md = losses::mdel(t, {t.param(emb)}, lab, 1.0);
            ad::Value loss = losses::total_loss(t, ce, gr, md, w);
            if (g) t.backward(loss);
            return loss.val()(0, 0);
        };
        CHECK(max_grad_rel_err({&logits, &recon, &emb}, eval, 30, rng) <= 1e-6);
    }
}
