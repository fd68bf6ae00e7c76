#include <doctest.h>

#include "gradcheck.hpp"
#include "rpra/autodiff.hpp"
#include "rpra/rng.hpp"
#include "rpra/wavelet.hpp"

using namespace rpra;

TEST_CASE("dwt2 hand-computed blocks") {
    Mat ones = Mat::Ones(2, 2);
    auto s = dwt2(ones);
    CHECK(s.ll(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.lh(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.hl(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.hh(0, 0) == doctest::Approx(0.0).epsilon(1e-12));

    Mat g(2, 2);
    g << 1, 2, 3, 4;
    auto s2 = dwt2(g);
    CHECK(s2.ll(0, 0) == doctest::Approx(5.0));
    CHECK(s2.hl(0, 0) == doctest::Approx(-1.0));
    CHECK(s2.lh(0, 0) == doctest::Approx(-2.0));
    CHECK(s2.hh(0, 0) == doctest::Approx(0.0));
    CHECK(subband_energy(s2) == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("constant grid has zero high-pass bands") {
    Mat g = Mat::Constant(6, 8, 3.7);
    auto s = dwt2(g);
    CHECK(s.lh.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(s.hl.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(s.hh.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("idwt2 inverts dwt2 and conserves energy") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 2 * (1 + static_cast<int>(rng.uniform_int(8)));
        const int w = 2 * (1 + static_cast<int>(rng.uniform_int(8)));
        Mat g = rpra::testing::random_mat(h, w, rng);
        auto s = dwt2(g);
        Mat back = idwt2(s);
        CHECK((back - g).cwiseAbs().maxCoeff() <= 1e-6);
        const double ge = g.squaredNorm();
        CHECK(std::abs(ge - subband_energy(s)) <= 1e-6 * ge);
    }
}

TEST_CASE("idwt2 of constant LL gives constant grid") {
    SubbandSet s;
    s.ll = Mat::Constant(1, 1, 2.0);
    s.lh = Mat::Zero(1, 1);
    s.hl = Mat::Zero(1, 1);
    s.hh = Mat::Zero(1, 1);
    Mat g = idwt2(s);
    CHECK((g - Mat::Ones(2, 2)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

    SubbandSet z;
    z.ll = z.lh = z.hl = z.hh = Mat::Zero(3, 2);
    CHECK(idwt2(z).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("linearity") {
    Rng rng(11);
    Mat a = rpra::testing::random_mat(4, 6, rng), b = rpra::testing::random_mat(4, 6, rng);
    const double al = 1.7, be = -0.4;
    auto s_mix = dwt2((al * a + be * b).eval());
    auto sa = dwt2(a);
    auto sb = dwt2(b);
    CHECK((s_mix.ll - (al * sa.ll + be * sb.ll)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((s_mix.hh - (al * sa.hh + be * sb.hh)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("shape errors") {
    CHECK_THROWS_AS(dwt2(Mat::Ones(3, 4)), InvalidInput);
    CHECK_THROWS_AS(dwt2(Mat::Ones(4, 5)), InvalidInput);
    SubbandSet s;
    s.ll = Mat::Zero(2, 2);
    s.lh = Mat::Zero(2, 3);
    s.hl = Mat::Zero(2, 2);
    s.hh = Mat::Zero(2, 2);
    CHECK_THROWS_AS(idwt2(s), InvalidInput);
}

TEST_CASE("transform gradients match finite differences") {
    Rng rng(13);
    const int F = 4, T = 6, d = 3;
    ad::Parameter x("x", rpra::testing::random_mat(F * T, d, rng));
    const Mat r_fwd = rpra::testing::random_mat(F * T / 4, d, rng);
    const Mat r_inv = rpra::testing::random_mat(F * T, d, rng);

    auto eval_dwt = [&](bool grad) {
        ad::Tape t(grad);
        ad::Value out = ad::dwt_band(t.param(x), F, T, ad::Band::HL);
        ad::Value loss = rpra::testing::weighted_sum(t, out, r_fwd);
        if (grad) t.backward(loss);
        return loss.val()(0, 0);
    };
    CHECK(rpra::testing::max_grad_rel_err({&x}, eval_dwt, 30, rng) <= 1e-6);

    auto eval_idwt = [&](bool grad) {
        ad::Tape t(grad);
        ad::Value in = t.param(x);
        ad::Value ll = ad::dwt_band(in, F, T, ad::Band::LL);
        ad::Value hl = ad::dwt_band(in, F, T, ad::Band::HL);
        ad::Value lh = ad::dwt_band(in, F, T, ad::Band::LH);
        ad::Value hh = ad::dwt_band(in, F, T, ad::Band::HH);
        ad::Value out = ad::idwt_merge(ll, hl, lh, hh, F, T);
        ad::Value loss = rpra::testing::weighted_sum(t, out, r_inv);
        if (grad) t.backward(loss);
        return loss.val()(0, 0);
    };
    CHECK(rpra::testing::max_grad_rel_err({&x}, eval_idwt, 30, rng) <= 1e-6);
}

TEST_CASE("tape round trip equals identity") {
    Rng rng(17);
    const int F = 4, T = 4, d = 5;
    Mat x = rpra::testing::random_mat(F * T, d, rng);
    ad::Tape t(false);
    ad::Value in = t.constant(x);
    ad::Value back = ad::idwt_merge(ad::dwt_band(in, F, T, ad::Band::LL),
                                    ad::dwt_band(in, F, T, ad::Band::HL),
                                    ad::dwt_band(in, F, T, ad::Band::LH),
                                    ad::dwt_band(in, F, T, ad::Band::HH), F, T);
    CHECK((back.val() - x).cwiseAbs().maxCoeff() <= 1e-12);
}
