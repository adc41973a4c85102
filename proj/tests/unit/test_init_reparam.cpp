#include <cmath>
#include <functional>
#include <stdexcept>

#include "doctest.h"
#include "wesar/init.hpp"
#include "wesar/reparam.hpp"
#include "wesar/rng.hpp"

using namespace wesar;

namespace {

double emp_std(const Matrix& m) {
    double mean = 0.0;
    for (double x : m.data) mean += x;
    mean /= static_cast<double>(m.size());
    double var = 0.0;
    for (double x : m.data) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(m.size()));
}

// Central finite difference of a scalar function of one coordinate.
double fd_central(const std::function<double()>& f, double& x, double h) {
    const double saved = x;
    x = saved + h;
    const double fp = f();
    x = saved - h;
    const double fm = f();
    x = saved;
    return (fp - fm) / (2.0 * h);
}

Matrix random_matrix(Rng& rng, int r, int c, double sd = 1.0) {
    return gaussian_fill(rng, r, c, sd);
}

}  // namespace

TEST_CASE("init: virtual stds match the role formulas") {
    CHECK(virtual_std(Role::Embed, 768, 12) == 1.0);
    CHECK(virtual_std(Role::Query, 768, 12) == doctest::Approx(std::sqrt(1.0 / 768)));
    CHECK(virtual_std(Role::Key, 64, 4) == virtual_std(Role::Query, 64, 4));
    CHECK(virtual_std(Role::Value, 64, 4) == virtual_std(Role::Query, 64, 4));
    CHECK(virtual_std(Role::FfnUp, 64, 4) == virtual_std(Role::Query, 64, 4));
    CHECK(virtual_std(Role::Unembed, 64, 4) == virtual_std(Role::Query, 64, 4));
    // W_d at d=768, N=12: sqrt(2/73728)
    CHECK(virtual_std(Role::FfnDown, 768, 12) == doctest::Approx(5.2083e-3).epsilon(1e-4));
    // residual attenuation: W_o / W_q = 1/sqrt(2N); about 0.1118 at N=40
    double ratio = virtual_std(Role::AttnOut, 768, 40) / virtual_std(Role::Query, 768, 40);
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(80.0)));
    CHECK(ratio == doctest::Approx(0.1118).epsilon(1e-3));
    CHECK_THROWS_AS(virtual_std(Role::Gamma, 64, 4), ConfigError);
    CHECK_THROWS_AS(virtual_std(Role::Query, 0, 4), ConfigError);
}

TEST_CASE("init: actual stds per scheme") {
    InitSpec he{InitScheme::He, 0.0, EmbedScaling::ConstMultiplier};
    InitSpec sm{InitScheme::Small, 0.0, EmbedScaling::ConstMultiplier};
    InitSpec ws{InitScheme::WeSaR, std::sqrt(4e-5), EmbedScaling::None};

    // he: virtual scale except the embedding keeps its fan-in draw
    CHECK(actual_std(Role::Embed, he, 768, 12) == doctest::Approx(std::sqrt(1.0 / 768)));
    CHECK(actual_std(Role::Query, he, 768, 12) == virtual_std(Role::Query, 768, 12));
    CHECK(actual_std(Role::AttnOut, he, 768, 12) == virtual_std(Role::AttnOut, 768, 12));

    // small: common sqrt(2/(5d)), residual outputs sqrt(2/(10Nd))
    CHECK(actual_std(Role::Query, sm, 2048, 24) == doctest::Approx(1.3975e-2).epsilon(1e-4));
    CHECK(actual_std(Role::Embed, sm, 2048, 24) == actual_std(Role::Unembed, sm, 2048, 24));
    CHECK(actual_std(Role::AttnOut, sm, 2048, 24) == doctest::Approx(2.0172e-3).epsilon(1e-4));
    CHECK(actual_std(Role::FfnDown, sm, 2048, 24) == actual_std(Role::AttnOut, sm, 2048, 24));

    // wesar: one sigma for everything
    for (Role r : kWeightRoles)
        CHECK(actual_std(r, ws, 768, 12) == doctest::Approx(6.3246e-3).epsilon(1e-4));
}

TEST_CASE("init: stds shrink with width and with depth on residual outputs") {
    InitSpec sm{InitScheme::Small, 0.0, EmbedScaling::None};
    for (Role r : kWeightRoles) {
        if (r == Role::Embed) continue;  // virtual embed std is the constant 1
        CHECK(virtual_std(r, 128, 8) < virtual_std(r, 64, 8));
    }
    CHECK(actual_std(Role::Query, sm, 128, 8) < actual_std(Role::Query, sm, 64, 8));
    CHECK(virtual_std(Role::AttnOut, 64, 16) < virtual_std(Role::AttnOut, 64, 8));
    CHECK(virtual_std(Role::FfnDown, 64, 16) < virtual_std(Role::FfnDown, 64, 8));
    CHECK(actual_std(Role::AttnOut, sm, 64, 16) < actual_std(Role::AttnOut, sm, 64, 8));
    // non-residual roles do not depend on depth
    CHECK(virtual_std(Role::Query, 64, 16) == virtual_std(Role::Query, 64, 8));
}

TEST_CASE("init: gate times actual std reproduces the virtual std") {
    const double sigma = std::sqrt(4e-5);
    InitSpec ws{InitScheme::WeSaR, sigma, EmbedScaling::None};
    for (Role r : kWeightRoles) {
        double a = wesar_gate_init(r, 768, 12, sigma);
        double actual = actual_std(r, ws, 768, 12);
        CHECK(a * actual == doctest::Approx(virtual_std(r, 768, 12)).epsilon(1e-15));
    }
}

TEST_CASE("init: embedding multiplier is 1/sigma_e for the baselines") {
    InitSpec he{InitScheme::He, 0.0, EmbedScaling::ConstMultiplier};
    InitSpec sm{InitScheme::Small, 0.0, EmbedScaling::ConstMultiplier};
    InitSpec he_off{InitScheme::He, 0.0, EmbedScaling::None};
    InitSpec ws{InitScheme::WeSaR, 1e-2, EmbedScaling::None};
    CHECK(embed_multiplier(he, 64) == doctest::Approx(8.0));  // 1/sqrt(1/64)
    CHECK(embed_multiplier(sm, 2048) == doctest::Approx(std::sqrt(5.0 * 2048 / 2.0)));
    CHECK(embed_multiplier(he_off, 64) == 1.0);
    CHECK(embed_multiplier(ws, 64) == 1.0);
}

TEST_CASE("init: drawn weights have the commanded scale and gamma is ones") {
    ModelConfig mc;
    mc.d = 64;
    mc.n_layers = 4;
    mc.n_heads = 4;
    mc.vocab = 256;
    mc.ctx = 32;

    SUBCASE("wesar draws every matrix at sigma and restores virtual scale") {
        ReparamMode mode;  // wesar, sigma_sq 4e-5
        Params p = make_params(mc, mode);
        Rng rng(1234);
        InitSpec spec{InitScheme::WeSaR, mode.sigma(), EmbedScaling::None};
        initialize_model(p, spec, rng);
        for (const auto& t : p.tensors) {
            if (t.is_gamma()) {
                for (double x : t.weight.data) CHECK(x == 1.0);
                continue;
            }
            if (t.weight.size() < 10000) continue;  // sampling noise too big below this
            CHECK(emp_std(t.weight) == doctest::Approx(mode.sigma()).epsilon(0.03));
            // virtual weight matches the he-level virtual std
            CHECK(emp_std(t.vw) ==
                  doctest::Approx(virtual_std(t.role, mc.d, mc.n_layers)).epsilon(0.03));
        }
    }

    SUBCASE("he backbone draws role-dependent stds") {
        ReparamMode none;
        none.kind = ReparamKind::None;
        Params p = make_params(mc, none);
        Rng rng(99);
        InitSpec spec{InitScheme::He, 0.0, EmbedScaling::ConstMultiplier};
        initialize_model(p, spec, rng);
        CHECK(emp_std(p.find("W_e").weight) == doctest::Approx(std::sqrt(1.0 / 64)).epsilon(0.03));
        CHECK(emp_std(p.find("layer0.W_d").weight) ==
              doctest::Approx(std::sqrt(2.0 / (8.0 * 4 * 64))).epsilon(0.03));
        CHECK(emp_std(p.find("layer0.W_u").weight) ==
              doctest::Approx(std::sqrt(1.0 / 64)).epsilon(0.03));
    }

    SUBCASE("residual scaling draws W_o and W_d without the depth factor") {
        ReparamMode rs;
        rs.kind = ReparamKind::ResidualScaling;
        ModelConfig wide = mc;
        wide.d = 128;
        wide.n_heads = 2;
        Params p = make_params(wide, rs);
        Rng rng(7);
        InitSpec spec{InitScheme::He, 0.0, EmbedScaling::ConstMultiplier};
        initialize_model(p, spec, rng);
        // unscaled he: W_o at sqrt(1/d), not sqrt(1/(2Nd))
        CHECK(emp_std(p.find("layer0.W_o").weight) ==
              doctest::Approx(std::sqrt(1.0 / 128)).epsilon(0.03));
        CHECK(emp_std(p.find("layer0.W_d").weight) ==
              doctest::Approx(std::sqrt(2.0 / (4.0 * 128))).epsilon(0.03));
    }

    SUBCASE("same seed reproduces the same draw") {
        ReparamMode mode;
        Params a = make_params(mc, mode);
        Params b = make_params(mc, mode);
        Rng r1(5), r2(5);
        InitSpec spec{InitScheme::WeSaR, mode.sigma(), EmbedScaling::None};
        initialize_model(a, spec, r1);
        initialize_model(b, spec, r2);
        for (std::size_t i = 0; i < a.tensors.size(); ++i)
            CHECK(a.tensors[i].weight.data == b.tensors[i].weight.data);
    }

    SUBCASE("wesar paired-mode check") {
        ReparamMode none;
        none.kind = ReparamKind::None;
        Params p = make_params(mc, none);
        Rng rng(1);
        InitSpec spec{InitScheme::WeSaR, 1e-2, EmbedScaling::None};
        CHECK_THROWS_AS(initialize_model(p, spec, rng), ConfigError);
    }
}

TEST_CASE("init: std table text and csv") {
    std::string txt = init_table_text(768, 12, std::sqrt(4e-5));
    CHECK(txt.find("role") != std::string::npos);
    CHECK(txt.find("W_e") != std::string::npos);
    CHECK(txt.find("W_d") != std::string::npos);
    std::string csv = init_table_csv(768, 12, std::sqrt(4e-5));
    CHECK(csv.rfind("role,virtual_std,he,small,wesar\n", 0) == 0);
    // 8 role rows + header
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 9);
    CHECK(csv.find("W_e,1,") != std::string::npos);
}

TEST_CASE("reparam: wesar gate init examples") {
    // virtual std equal to sigma gives a unit gate
    CHECK(wesar_gate_init(Role::Query, 4, 1, 0.5) == doctest::Approx(1.0));
    CHECK(wesar_gate_init(Role::Query, 768, 12, 6.3246e-3) == doctest::Approx(5.7055).epsilon(1e-4));
    CHECK(wesar_gate_init(Role::Embed, 768, 12, 6.3246e-3) == doctest::Approx(158.11).epsilon(1e-4));
    CHECK_THROWS_AS(wesar_gate_init(Role::Query, 64, 4, 0.0), ConfigError);
}

TEST_CASE("reparam: wesar apply and backward") {
    Rng rng(42);
    Matrix w = random_matrix(rng, 5, 4);
    Matrix dvw = random_matrix(rng, 5, 4);

    SUBCASE("unit gate is the identity") {
        Matrix vw = wesar_apply(w, 1.0);
        CHECK(vw.data == w.data);
        Matrix dw;
        double da = 0.0;
        wesar_backward(dvw, w, 1.0, dw, da);
        CHECK(dw.data == dvw.data);
    }

    SUBCASE("upstream gradient equal to w gives dalpha = squared Frobenius norm") {
        Matrix dw;
        double da = 0.0;
        wesar_backward(w, w, 2.0, dw, da);
        CHECK(da == doctest::Approx(fro_norm(w) * fro_norm(w)).epsilon(1e-12));
    }

    SUBCASE("finite differences confirm both gradients") {
        double alpha = 1.3;
        Matrix dw;
        double da = 0.0;
        wesar_backward(dvw, w, alpha, dw, da);
        auto loss = [&]() { return dot(dvw, wesar_apply(w, alpha)); };
        CHECK(fd_central(loss, alpha, 1e-6) == doctest::Approx(da).epsilon(1e-6));
        for (int idx : {0, 7, 19}) {
            double g = fd_central(loss, w.data[static_cast<std::size_t>(idx)], 1e-6);
            CHECK(g == doctest::Approx(dw.data[static_cast<std::size_t>(idx)]).epsilon(1e-6));
        }
    }

    SUBCASE("shape mismatch throws") {
        Matrix bad(4, 5);
        Matrix dw;
        double da = 0.0;
        CHECK_THROWS_AS(wesar_backward(bad, w, 1.0, dw, da), std::invalid_argument);
    }
}

TEST_CASE("reparam: weightnorm apply and backward") {
    Rng rng(77);

    SUBCASE("unit-norm rows with unit gates pass through") {
        Matrix w(2, 2);
        w.at(0, 0) = 1.0;
        w.at(1, 1) = -1.0;
        std::vector<double> alpha = {1.0, 1.0};
        Matrix vw = weightnorm_apply(w, alpha);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(vw.data[i] == doctest::Approx(w.data[i]));
    }

    SUBCASE("radial upstream gradient produces zero weight gradient") {
        Matrix w = random_matrix(rng, 6, 5);
        std::vector<double> alpha(6, 1.0);
        Matrix dw;
        std::vector<double> da;
        weightnorm_backward(w, w, alpha, dw, da);  // dvw = w: purely radial per row
        for (double x : dw.data) CHECK(std::abs(x) < 1e-14);
        // and dalpha_i is exactly the row norm
        for (int r = 0; r < 6; ++r) {
            double n = 0.0;
            for (int c = 0; c < 5; ++c) n += w.at(r, c) * w.at(r, c);
            CHECK(da[static_cast<std::size_t>(r)] == doctest::Approx(std::sqrt(n)).epsilon(1e-12));
        }
    }

    SUBCASE("finite differences confirm the full jacobian") {
        Matrix w = random_matrix(rng, 6, 5);
        Matrix dvw = random_matrix(rng, 6, 5);
        std::vector<double> alpha;
        for (int r = 0; r < 6; ++r) alpha.push_back(0.5 + rng.uniform());
        Matrix dw;
        std::vector<double> da;
        weightnorm_backward(dvw, w, alpha, dw, da);
        auto loss = [&]() { return dot(dvw, weightnorm_apply(w, alpha)); };
        for (std::size_t r = 0; r < alpha.size(); ++r) {
            double g = fd_central(loss, alpha[r], 1e-6);
            CHECK(g == doctest::Approx(da[r]).epsilon(1e-6));
        }
        for (int idx : {0, 3, 11, 17, 29}) {
            double g = fd_central(loss, w.data[static_cast<std::size_t>(idx)], 1e-6);
            CHECK(g == doctest::Approx(dw.data[static_cast<std::size_t>(idx)]).epsilon(1e-6));
        }
    }

    SUBCASE("zero rows are floored, outputs stay finite") {
        Matrix w(3, 4);  // all-zero matrix
        std::vector<double> alpha = {1.0, 2.0, 3.0};
        Matrix vw = weightnorm_apply(w, alpha);
        CHECK(vw.all_finite());
        Matrix dvw = random_matrix(rng, 3, 4);
        Matrix dw;
        std::vector<double> da;
        weightnorm_backward(dvw, w, alpha, dw, da);
        CHECK(dw.all_finite());
    }

    SUBCASE("gate length must match rows") {
        Matrix w = random_matrix(rng, 3, 4);
        std::vector<double> alpha = {1.0, 1.0};
        CHECK_THROWS_AS(weightnorm_apply(w, alpha), std::invalid_argument);
    }
}

TEST_CASE("reparam: sigmareparam power iteration and backward") {
    Rng rng(2718);

    auto fresh_state = [&](const Matrix& w) {
        PowerIterState st;
        st.u.resize(static_cast<std::size_t>(w.rows));
        st.v.resize(static_cast<std::size_t>(w.cols));
        for (double& x : st.u) x = rng.gaussian();
        for (double& x : st.v) x = rng.gaussian();
        double nu = 0.0, nv = 0.0;
        for (double x : st.u) nu += x * x;
        for (double x : st.v) nv += x * x;
        for (double& x : st.u) x /= std::sqrt(nu);
        for (double& x : st.v) x /= std::sqrt(nv);
        return st;
    };

    SUBCASE("isotropic matrix converges in one step") {
        Matrix w(3, 3);
        for (int i = 0; i < 3; ++i) w.at(i, i) = -2.0;
        PowerIterState st = fresh_state(w);
        power_iterate(w, st);
        CHECK(st.est == doctest::Approx(2.0).epsilon(1e-12));
        Matrix vw = sigma_reparam_apply(w, 1.0, st);
        for (int i = 0; i < 3; ++i) CHECK(vw.at(i, i) == doctest::Approx(-1.0));
    }

    SUBCASE("diag(3,1) converges to 3") {
        Matrix w(2, 2);
        w.at(0, 0) = 3.0;
        w.at(1, 1) = 1.0;
        PowerIterState st = fresh_state(w);
        for (int i = 0; i < 60; ++i) power_iterate(w, st);
        CHECK(st.est == doctest::Approx(3.0).epsilon(1e-10));
    }

    SUBCASE("unit spectral norm with unit gate is the identity map") {
        Matrix w(3, 3);
        for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
        PowerIterState st = fresh_state(w);
        power_iterate(w, st);
        Matrix vw = sigma_reparam_apply(w, 1.0, st);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(vw.data[i] == doctest::Approx(w.data[i]));
    }

    SUBCASE("estimate never decreases for a fixed matrix") {
        Matrix w = random_matrix(rng, 20, 12);
        PowerIterState st = fresh_state(w);
        power_iterate(w, st);
        double prev = st.est;
        for (int i = 0; i < 40; ++i) {
            power_iterate(w, st);
            CHECK(st.est >= prev * (1.0 - 1e-13));
            prev = st.est;
        }
    }

    SUBCASE("backward matches finite differences with the estimate frozen") {
        Matrix w = random_matrix(rng, 5, 4);
        Matrix dvw = random_matrix(rng, 5, 4);
        PowerIterState st = fresh_state(w);
        power_iterate(w, st);
        double alpha = 0.8;
        Matrix dw;
        double da = 0.0;
        sigma_reparam_backward(dvw, w, alpha, st, dw, da);
        auto loss = [&]() { return dot(dvw, sigma_reparam_apply(w, alpha, st)); };
        CHECK(fd_central(loss, alpha, 1e-6) == doctest::Approx(da).epsilon(1e-6));
        for (int idx : {1, 8, 15}) {
            double g = fd_central(loss, w.data[static_cast<std::size_t>(idx)], 1e-6);
            CHECK(g == doctest::Approx(dw.data[static_cast<std::size_t>(idx)]).epsilon(1e-6));
        }
    }

    SUBCASE("degenerate estimate is rejected") {
        Matrix w(3, 3);  // zero matrix
        PowerIterState st = fresh_state(w);
        power_iterate(w, st);
        CHECK(st.est == 0.0);
        CHECK_THROWS_AS(sigma_reparam_apply(w, 1.0, st), std::runtime_error);
    }
}

TEST_CASE("reparam: residual multiplier") {
    CHECK(residual_multiplier(ReparamKind::ResidualScaling, 12) ==
          doctest::Approx(0.20412).epsilon(1e-4));
    CHECK(residual_multiplier(ReparamKind::ResidualScaling, 12) ==
          doctest::Approx(1.0 / std::sqrt(24.0)));
    CHECK(residual_multiplier(ReparamKind::None, 12) == 1.0);
    CHECK(residual_multiplier(ReparamKind::WeSaR, 12) == 1.0);

    // scaling the output equals scaling the weight, up to rounding
    Rng rng(5);
    Matrix x = gaussian_fill(rng, 7, 6, 1.0);
    Matrix w = gaussian_fill(rng, 6, 6, 0.3);
    const double s = residual_multiplier(ReparamKind::ResidualScaling, 8);
    Matrix scaled_out = matmul(x, w);
    scaled_out.scale(s);
    Matrix ws = w;
    ws.scale(s);
    Matrix out2 = matmul(x, ws);
    for (std::size_t i = 0; i < scaled_out.size(); ++i)
        CHECK(scaled_out.data[i] == doctest::Approx(out2.data[i]).epsilon(1e-12));
}

TEST_CASE("reparam: model-level refresh, backward, merge") {
    ModelConfig mc;
    mc.d = 8;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.vocab = 11;
    mc.ctx = 4;

    SUBCASE("mode none passes gradients through untouched") {
        ReparamMode none;
        none.kind = ReparamKind::None;
        Params p = make_params(mc, none);
        Rng rng(3);
        InitSpec spec{InitScheme::He, 0.0, EmbedScaling::None};
        initialize_model(p, spec, rng);
        auto& t = p.find("layer0.W_q");
        CHECK(t.vw.data == t.weight.data);
        t.vgrad = random_matrix(rng, 8, 8);
        reparam_backward(p);
        CHECK(t.grad_weight.data == t.vgrad.data);
    }

    SUBCASE("wesar maps gradients through the gate") {
        ReparamMode mode;
        Params p = make_params(mc, mode);
        Rng rng(3);
        InitSpec spec{InitScheme::WeSaR, mode.sigma(), EmbedScaling::None};
        initialize_model(p, spec, rng);
        auto& t = p.find("layer0.W_q");
        const double a = t.gate[0];
        CHECK(a == doctest::Approx(wesar_gate_init(Role::Query, 8, 1, mode.sigma())));
        t.vgrad = random_matrix(rng, 8, 8);
        reparam_backward(p);
        for (std::size_t i = 0; i < t.vgrad.size(); ++i)
            CHECK(t.grad_weight.data[i] == doctest::Approx(a * t.vgrad.data[i]));
        CHECK(t.grad_gate[0] == doctest::Approx(dot(t.vgrad, t.weight)));
    }

    SUBCASE("weightnorm init makes the virtual weight equal the draw") {
        ReparamMode wn;
        wn.kind = ReparamKind::WeightNorm;
        Params p = make_params(mc, wn);
        Rng rng(3);
        InitSpec spec{InitScheme::He, 0.0, EmbedScaling::None};
        initialize_model(p, spec, rng);
        for (const auto& t : p.tensors) {
            if (t.is_gamma()) continue;
            CHECK(t.vw.data == t.weight.data);
        }
    }

    SUBCASE("sigmareparam init leaves a live estimate") {
        ReparamMode sr;
        sr.kind = ReparamKind::SigmaReparam;
        Params p = make_params(mc, sr);
        Rng rng(3);
        InitSpec spec{InitScheme::He, 0.0, EmbedScaling::None};
        initialize_model(p, spec, rng);
        for (const auto& t : p.tensors) {
            if (t.is_gamma()) continue;
            CHECK(t.power.est > 0.0);
            CHECK(t.vw.all_finite());
        }
    }

    SUBCASE("merge folds gates and is idempotent") {
        ReparamMode mode;
        Params p = make_params(mc, mode);
        Rng rng(9);
        InitSpec spec{InitScheme::WeSaR, mode.sigma(), EmbedScaling::None};
        initialize_model(p, spec, rng);
        std::vector<std::vector<double>> vw_before;
        for (const auto& t : p.tensors) vw_before.push_back(t.vw.data);
        merge_gates(p);
        std::size_t i = 0;
        for (const auto& t : p.tensors) {
            if (!t.is_gamma()) {
                CHECK(t.gate[0] == 1.0);
                CHECK(t.vw.data == vw_before[i]);  // virtual weight unchanged, bitwise
                CHECK(t.weight.data == vw_before[i]);
            }
            ++i;
        }
        std::vector<std::vector<double>> after_once;
        for (const auto& t : p.tensors) after_once.push_back(t.weight.data);
        merge_gates(p);  // second merge is a no-op
        i = 0;
        for (const auto& t : p.tensors) CHECK(t.weight.data == after_once[i++]);

        ReparamMode none;
        none.kind = ReparamKind::None;
        Params q = make_params(mc, none);
        CHECK_THROWS_AS(merge_gates(q), ConfigError);
    }

    SUBCASE("gate parameter overhead is one scalar (wesar) or d_out (weightnorm)") {
        ReparamMode mode;
        Params pw = make_params(mc, mode);
        std::size_t wesar_gates = 0;
        for (const auto& t : pw.tensors) wesar_gates += t.gate.size();
        CHECK(wesar_gates == 8);  // W_e + six per layer + W_p at one layer

        std::size_t non_gamma = 0;
        for (const auto& t : pw.tensors)
            if (!t.is_gamma()) ++non_gamma;
        CHECK(wesar_gates == non_gamma);

        ReparamMode wn;
        wn.kind = ReparamKind::WeightNorm;
        Params pn = make_params(mc, wn);
        std::size_t wn_gates = 0, rows = 0;
        for (const auto& t : pn.tensors) {
            wn_gates += t.gate.size();
            if (!t.is_gamma()) rows += static_cast<std::size_t>(t.weight.rows);
        }
        CHECK(wn_gates == rows);
    }
}
