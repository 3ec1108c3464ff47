#include <catch_amalgamated.hpp>

#include <random>

#include <invctl/lyap.hpp>
#include <invctl/norms.hpp>
#include <invctl/reduction.hpp>
#include <invctl/statespace.hpp>

using namespace invctl;
using Catch::Approx;

namespace {

// Table values of the 1-phase inverter under study.
constexpr double kLf = 2e-3, kRf = 0.2, kCf = 20e-6;

StateSpace random_stable(int n, int m, int p, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix A(n, n), B(n, m), C(p, n), D(p, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    // shift to the left half plane
    Eigen::VectorXcd ev = A.eigenvalues();
    double maxre = -1e300;
    for (int i = 0; i < n; ++i) maxre = std::max(maxre, ev(i).real());
    A -= (maxre + 0.5 + std::abs(g(rng))) * Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) B(i, j) = g(rng);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < n; ++j) C(i, j) = g(rng);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < m; ++j) D(i, j) = g(rng);
    return StateSpace(A, B, C, D);
}

} // namespace

TEST_CASE("tf_to_ss first order canonical form") {
    StateSpace ss = tf_to_ss(RationalTF({1.0}, {1.0, 1.0}));
    REQUIRE(ss.order() == 1);
    CHECK(ss.A(0, 0) == Approx(-1.0));
    CHECK(ss.B(0, 0) * ss.C(0, 0) == Approx(1.0));
    CHECK(ss.D(0, 0) == Approx(0.0));
}

TEST_CASE("tf_to_ss constant gain") {
    StateSpace ss = tf_to_ss(RationalTF::constant(2.0));
    REQUIRE(ss.order() == 0);
    CHECK(ss.D(0, 0) == Approx(2.0));
}

TEST_CASE("tf_to_ss rejects improper systems") {
    CHECK_THROWS_AS(tf_to_ss(RationalTF({1.0, 0.0, 0.0}, {1.0, 1.0})), ImproperSystem);
}

TEST_CASE("tf_to_ss matches polynomial evaluation for the filter G1") {
    // G1(s) = 1 / (Lf Cf s^2 + Rf Cf s + 1), evaluated at s = j*376.99
    RationalTF g1({1.0}, {kLf * kCf, kRf * kCf, 1.0});
    StateSpace ss = tf_to_ss(g1);
    REQUIRE(ss.order() == 2);
    const Complex s{0.0, 376.99};
    const Complex direct = g1.eval(s);
    const Complex viass = ss.eval(s)(0, 0);
    CHECK(std::abs(viass - direct) <= 1e-10 * std::abs(direct));
}

TEST_CASE("freq_response of first-order pole") {
    StateSpace ss = tf_to_ss(RationalTF({1.0}, {1.0, 1.0}));
    FreqGrid g;
    g.points = {1.0};
    auto H = freq_response(ss, g);
    CHECK(std::abs(H[0](0, 0)) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::arg(H[0](0, 0)) * 180.0 / M_PI == Approx(-45.0));
}

TEST_CASE("freq_response static gain") {
    StateSpace ss = StateSpace::gain(2.0);
    CHECK(ss.eval_jw(123.0)(0, 0).real() == Approx(2.0));
    CHECK(ss.eval_jw(123.0)(0, 0).imag() == Approx(0.0));
}

TEST_CASE("freq_response resonance peak of G1 near 1/sqrt(Lf Cf)") {
    RationalTF g1({1.0}, {kLf * kCf, kRf * kCf, 1.0});
    StateSpace ss = tf_to_ss(g1);
    const double wr = 1.0 / std::sqrt(kLf * kCf); // 5000 rad/s
    const double mag_ss = std::abs(ss.eval_jw(wr)(0, 0));
    const double mag_poly = std::abs(g1.eval_jw(wr));
    CHECK(mag_ss == Approx(mag_poly).epsilon(1e-9));
    CHECK(mag_ss >= 0.95 / (kRf * kCf * wr));
}

TEST_CASE("freq_response rejects evaluation at an imaginary-axis pole") {
    // pure oscillator 1/(s^2+1) has poles at +-j
    StateSpace ss = tf_to_ss(RationalTF({1.0}, {1.0, 0.0, 1.0}));
    CHECK_THROWS_AS(ss.eval_jw(1.0), SingularResolvent);
}

TEST_CASE("series interconnection") {
    StateSpace a = tf_to_ss(RationalTF({1.0}, {1.0, 1.0}));
    StateSpace b = tf_to_ss(RationalTF({1.0}, {1.0, 2.0}));
    StateSpace c = series(a, b);
    REQUIRE(c.order() == 2);
    RationalTF expect({1.0}, poly::mul({1.0, 1.0}, {1.0, 2.0}));
    for (double w : {0.1, 1.0, 10.0, 100.0}) {
        const Complex h = c.eval_jw(w)(0, 0);
        CHECK(std::abs(h - expect.eval_jw(w)) <= 1e-10 * std::abs(expect.eval_jw(w)));
    }
}

TEST_CASE("negative unity feedback around an integrator") {
    StateSpace l = tf_to_ss(RationalTF({1.0}, {1.0, 0.0}));
    StateSpace cl = feedback(l, StateSpace::gain(1.0));
    RationalTF expect({1.0}, {1.0, 1.0});
    for (double w : {0.01, 1.0, 50.0})
        CHECK(std::abs(cl.eval_jw(w)(0, 0) - expect.eval_jw(w)) < 1e-12);
}

TEST_CASE("feedback detects ill-posed DC algebraic loop") {
    // positive unity feedback around unity gain: I - D = 0
    CHECK_THROWS_AS(feedback(StateSpace::gain(1.0), StateSpace::gain(1.0), +1),
                    IllPosedLoop);
}

TEST_CASE("upper_lft trivial cases") {
    std::mt19937 rng(7);
    StateSpace M = random_stable(3, 3, 3, rng);
    SECTION("Delta = 0 returns M22 exactly") {
        StateSpace r = upper_lft(M, Matrix::Zero(2, 2));
        StateSpace m22 = M.subsystem(2, 1, 2, 1);
        for (double w : {0.3, 3.0, 33.0})
            CHECK(std::abs(r.eval_jw(w)(0, 0) - m22.eval_jw(w)(0, 0)) < 1e-12);
    }
    SECTION("scalar affine case with M11 = 0") {
        Matrix D = M.D;
        D(0, 0) = 0.0;
        StateSpace M2(M.A, M.B, M.C, D);
        Matrix C0 = M2.C;
        C0.row(0).setZero();
        StateSpace M3(M2.A, M2.B, C0, M2.D); // M11 == 0 as a system
        Matrix delta = Matrix::Constant(1, 1, 0.37);
        StateSpace r = upper_lft(M3, delta);
        // expected: M22 + M21*delta*M12 (2x2 lower-right of M3)
        for (double w : {0.5, 5.0}) {
            CMatrix H = M3.eval_jw(w);
            CMatrix expect = H.bottomRightCorner(2, 2) +
                             H.bottomLeftCorner(2, 1) * delta * H.topRightCorner(1, 2);
            CMatrix got = r.eval_jw(w);
            CHECK((got - expect).norm() < 1e-10);
        }
    }
}

TEST_CASE("lower_lft with zero controller is the open loop") {
    std::mt19937 rng(11);
    StateSpace P = random_stable(4, 3, 3, rng); // 2 exogenous + 1 control each way
    StateSpace K = StateSpace::gain(0.0);
    StateSpace N = lower_lft(P, K);
    for (double w : {0.2, 2.0, 20.0}) {
        CMatrix full = P.eval_jw(w);
        CHECK((N.eval_jw(w) - full.topLeftCorner(2, 2)).norm() < 1e-12);
    }
}

TEST_CASE("lower_lft no-algebraic-loop formula") {
    std::mt19937 rng(13);
    StateSpace P = random_stable(3, 2, 2, rng);
    Matrix D = P.D;
    D(1, 1) = 0.0; // P_yu = 0 feedthrough
    StateSpace Pz(P.A, P.B, P.C, D);
    // also kill the dynamic part of P_yu so the formula is exact per frequency
    StateSpace K = StateSpace::gain(1.7);
    StateSpace N = lower_lft(Pz, K);
    for (double w : {0.4, 4.0}) {
        CMatrix H = Pz.eval_jw(w);
        const Complex pyu = H(1, 1);
        const Complex kk = 1.7 / (1.0 - pyu * 1.7);
        const Complex expect = H(0, 0) + H(0, 1) * kk * H(1, 0);
        CHECK(std::abs(N.eval_jw(w)(0, 0) - expect) < 1e-10);
    }
}

TEST_CASE("is_stable basics") {
    CHECK(is_stable(StateSpace(Matrix::Constant(1, 1, -1.0), Matrix::Zero(1, 1),
                               Matrix::Zero(1, 1), Matrix::Zero(1, 1))));
    // marginal pole at the origin counts as unstable
    CHECK_FALSE(is_stable(StateSpace(Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                                     Matrix::Zero(1, 1), Matrix::Zero(1, 1))));
}

TEST_CASE("is_stable agrees with an independent eigensolver route") {
    std::mt19937 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + trial % 5;
        Matrix A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = g(rng);
        A -= (trial % 3) * Matrix::Identity(n, n);
        StateSpace sys(A, Matrix::Zero(n, 1), Matrix::Zero(1, n), Matrix::Zero(1, 1));
        Eigen::ComplexEigenSolver<CMatrix> ces(A.cast<Complex>());
        double maxre = -1e300;
        for (int i = 0; i < n; ++i) maxre = std::max(maxre, ces.eigenvalues()(i).real());
        CHECK(is_stable(sys) == (maxre < -kStabilityTol));
    }
}

TEST_CASE("hinf_norm of simple systems") {
    CHECK(hinf_norm(tf_to_ss(RationalTF({1.0}, {1.0, 1.0}))) == Approx(1.0).epsilon(1e-5));
    Matrix D(2, 2);
    D << 3.0, 0.0, 0.0, 1.0;
    CHECK(hinf_norm(StateSpace::gain(D)) == Approx(3.0));
}

TEST_CASE("hinf_norm matches a dense grid search on random systems") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        StateSpace sys = random_stable(4, 2, 2, rng);
        HinfResult res = hinf_norm_detail(sys);
        double grid_max = sigma_max(sys.D.cast<Complex>());
        FreqGrid g = FreqGrid::logspace(1e-4, 1e4, 3000);
        for (double w : g.points) grid_max = std::max(grid_max, sigma_max(sys.eval_jw(w)));
        CHECK(res.norm >= grid_max * (1.0 - 1e-6));
        CHECK(res.norm <= grid_max * (1.0 + 1e-4) + 1e-12);
    }
}

TEST_CASE("hinf_norm dominates the response at random frequencies") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> wlog(-3.0, 4.0);
    for (int trial = 0; trial < 10; ++trial) {
        StateSpace sys = random_stable(4, 1, 1, rng);
        const double nrm = hinf_norm(sys);
        for (int k = 0; k < 1000; ++k) {
            const double w = std::pow(10.0, wlog(rng));
            CHECK(sigma_max(sys.eval_jw(w)) <= nrm * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("hinf_norm requires stability") {
    StateSpace unstable(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1),
                        Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    CHECK_THROWS_AS(hinf_norm(unstable), UnstableSystem);
}

TEST_CASE("round-trip tf -> ss -> tf reproduces coefficients") {
    std::vector<RationalTF> tfs = {
        RationalTF({1.0}, {kLf * kCf, kRf * kCf, 1.0}),
        RationalTF({kLf, kRf}, {kLf * kCf, kRf * kCf, 1.0}),
        RationalTF({2.0, 3.0, 1.0}, {1.0, 4.0, 6.0, 4.0}),
        RationalTF({5.0, 1.0}, {1.0, 0.2, 25.0}),
    };
    for (const RationalTF& g : tfs) {
        RationalTF back = ss_to_tf(tf_to_ss(g)).monic();
        RationalTF ref = g.monic();
        REQUIRE(back.den.size() == ref.den.size());
        for (std::size_t i = 0; i < ref.den.size(); ++i)
            CHECK(back.den[i] == Approx(ref.den[i]).margin(1e-8 * std::abs(ref.den[0]) + 1e-12));
        REQUIRE(back.num.size() == ref.num.size());
        const double scale = std::abs(ref.num[0]) + 1.0;
        for (std::size_t i = 0; i < ref.num.size(); ++i)
            CHECK(back.num[i] == Approx(ref.num[i]).margin(1e-8 * scale));
    }
}

TEST_CASE("lyapunov solver residual") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        StateSpace sys = random_stable(5, 2, 2, rng);
        Matrix Q = sys.B * sys.B.transpose();
        Matrix X = lyap(sys.A, Q);
        Matrix res = sys.A * X + X * sys.A.transpose() + Q;
        CHECK(res.norm() <= 1e-9 * std::max(1.0, X.norm()));
    }
}

TEST_CASE("balanced truncation: full order keeps the response") {
    std::mt19937 rng(37);
    StateSpace sys = random_stable(5, 1, 1, rng);
    BalancedResult r = balanced_truncate(sys, 5);
    for (double w : {0.1, 1.0, 10.0})
        CHECK(std::abs(r.reduced.eval_jw(w)(0, 0) - sys.eval_jw(w)(0, 0)) < 1e-8);
}

TEST_CASE("balanced truncation: negligible tail state") {
    // two decoupled modes, one with tiny gain
    Matrix A = Matrix::Zero(2, 2), B(2, 1), C(1, 2), D = Matrix::Zero(1, 1);
    A(0, 0) = -1.0;
    A(1, 1) = -2.0;
    B << 1.0, 1e-6;
    C << 1.0, 1e-6;
    StateSpace sys(A, B, C, D);
    BalancedResult r = balanced_truncate(sys, 1);
    REQUIRE(r.hankel_values.size() == 2);
    StateSpace err = parallel(sys, StateSpace(r.reduced.A, r.reduced.B,
                                              (-r.reduced.C).eval(), (-r.reduced.D).eval()));
    CHECK(hinf_norm(err) <= 2.0 * r.hankel_values[1] * (1.0 + 1e-6) + 1e-14);
}

TEST_CASE("balanced truncation error respects the twice-tail Hankel bound") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 3 + trial % 5;
        StateSpace sys = random_stable(n, 1, 1, rng);
        const int r = 1 + trial % (n - 1);
        BalancedResult br = balanced_truncate(sys, r);
        double tail = 0.0;
        for (std::size_t i = static_cast<std::size_t>(r); i < br.hankel_values.size(); ++i)
            tail += br.hankel_values[i];
        StateSpace err = parallel(sys, StateSpace(br.reduced.A, br.reduced.B,
                                                  (-br.reduced.C).eval(), (-br.reduced.D).eval()));
        CHECK(hinf_norm(err) <= 2.0 * tail * (1.0 + 1e-6) + 1e-12);
    }
}

TEST_CASE("balanced truncation guards") {
    std::mt19937 rng(43);
    StateSpace sys = random_stable(3, 1, 1, rng);
    CHECK_THROWS_AS(balanced_truncate(sys, 4), OrderTooLarge);
    StateSpace unstable(Matrix::Constant(1, 1, 1.0), Matrix::Ones(1, 1),
                        Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    CHECK_THROWS_AS(balanced_truncate(unstable, 1), UnstableSystem);
}

TEST_CASE("bilinear discretization of the integrator is the trapezoid rule") {
    StateSpace integ = tf_to_ss(RationalTF({1.0}, {1.0, 0.0}));
    const double fs = 20e3;
    StateSpace d = bilinear_discretize(integ, fs);
    REQUIRE(d.dt.has_value());
    CHECK(d.A(0, 0) == Approx(1.0)); // discrete pole at z = 1
    // H(z) = (T/2)(z+1)/(z-1)
    const Complex z = std::exp(Complex{0.0, 2.0 * M_PI * 60.0 / fs});
    const Complex expect = (0.5 / fs) * (z + 1.0) / (z - 1.0);
    CHECK(std::abs(d.eval(z)(0, 0) - expect) < 1e-12);
}

TEST_CASE("bilinear discretization: static gain unchanged") {
    StateSpace d = bilinear_discretize(StateSpace::gain(3.3), 1e3);
    CHECK(d.D(0, 0) == Approx(3.3));
}

TEST_CASE("bilinear discretization matches continuous response in-band") {
    std::mt19937 rng(47);
    const double fs = 20e3;
    for (int trial = 0; trial < 10; ++trial) {
        StateSpace sys = random_stable(4, 1, 1, rng);
        StateSpace d = bilinear_discretize(sys, fs);
        for (double w : {10.0, 100.0, 1000.0, fs * 2.0 * M_PI / 20.0}) {
            const double mc = std::abs(sys.eval_jw(w)(0, 0));
            const double md = std::abs(d.eval_jw(w)(0, 0));
            if (mc > 1e-9) CHECK(md == Approx(mc).epsilon(0.01));
        }
    }
}

TEST_CASE("bilinear discretization rejects pole at the mapping singularity") {
    const double fs = 10.0;
    StateSpace bad(Matrix::Constant(1, 1, 2.0 * fs), Matrix::Ones(1, 1),
                   Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    CHECK_THROWS_AS(bilinear_discretize(bad, fs), PoleAtMappingSingularity);
}
