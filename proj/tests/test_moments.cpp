#include <random>

#include <gtest/gtest.h>

#include "lep/moments.hpp"

using namespace lep;

namespace {

// Printed forms, written out independently of the kron construction.
CMatrix printed_m(double g, double g12, double delta) {
    CMatrix m(4, 4);
    m << -2 * g, -g12, -g12, 0,                          //
        -g12, cplx(-2 * g, 2 * delta), 0, -g12,          //
        -g12, 0, cplx(-2 * g, -2 * delta), -g12,         //
        0, -g12, -g12, -2 * g;
    return 0.5 * m;
}

CMatrix printed_m_nhh(double g12, double delta) {
    CMatrix m(4, 4);
    m << 0, g12, -g12, 0,                 //
        g12, cplx(0, 2 * delta), 0, -g12,  //
        -g12, 0, cplx(0, -2 * delta), g12, //
        0, -g12, g12, 0;
    return 0.5 * m;
}

}  // namespace

TEST(Moments, MatchPrintedMatricesForRandomParameters) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        BimodalParams p;
        p.omega1 = 4 * u(rng) - 2;
        p.omega2 = 4 * u(rng) - 2;
        p.gamma = 0.2 + 3 * u(rng);
        p.gamma12 = p.gamma * (2 * u(rng) - 1);
        const auto m = p.model();
        EXPECT_LT(max_abs(second_moment_system(m).generator - printed_m(p.gamma, p.gamma12, p.delta())), 1e-13);
        EXPECT_LT(max_abs(nhh_second_moment_system(m).generator - printed_m_nhh(p.gamma12, p.delta())), 1e-13);
        CVector b(4);
        b << p.gamma, p.gamma12, p.gamma12, p.gamma;
        EXPECT_LT((second_moment_system(m).noise - b).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Moments, PresetGeneratorEntries) {
    const CMatrix two_m = 2.0 * second_moment_system(fig1_preset().model()).generator;
    EXPECT_EQ(two_m(1, 1), cplx(-6, -2));
    EXPECT_EQ(two_m(2, 2), cplx(-6, 2));
    EXPECT_EQ(two_m(0, 3), cplx(0));
    const auto labels = second_moment_system(fig1_preset().model()).basis;
    EXPECT_EQ(labels[1], "<a1^dag a2>");
}

TEST(Moments, SteadyStateIsThermalForAnyDamping) {
    auto p = fig1_preset();
    p.n_th = 0.2;
    const auto c = unvec_rows(steady_state_moments(second_moment_system(p.model()), 0.2), 2);
    EXPECT_LT(max_abs(c - 0.2 * CMatrix::Identity(2, 2)), 1e-14);

    const auto three = load_model(R"({"modes": [{"omega": -1}, {"omega": 0}, {"omega": 1}],
        "chi": [[0, 0.3, 0], [0.3, 0, [0.1, 0.2]], [0, [0.1, -0.2], 0]],
        "gamma": [[2, 0.5, 0], [0.5, 2, 0.5], [0, 0.5, 2]], "n_th": 0.1})");
    EXPECT_LT(max_abs(unit_steady_state(three) - CMatrix::Identity(3, 3)), 1e-13);
    EXPECT_THROW(steady_state_moments(nhh_second_moment_system(three), 1.0), ValidationError);
}

TEST(Moments, EigenvaluesAndNhhShift) {
    for (double g12 : {0.0, 0.5, 1.5, 2.5}) {
        BimodalParams p;
        p.gamma12 = g12;
        const auto m = p.model();
        Eigen::ComplexEigenSolver<CMatrix> el(second_moment_system(m).generator, false);
        Eigen::ComplexEigenSolver<CMatrix> en(nhh_second_moment_system(m).generator, false);
        const cplx d = std::sqrt(cplx(g12 * g12 - 1.0));
        CVector expect(4);
        expect << -3.0 + d, -3.0 - d, -3.0, -3.0;
        const auto perm = match_eigenvalues(expect, el.eigenvalues());
        for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(el.eigenvalues()(perm[k]) - expect(k)), 1e-10);
        const CVector shifted = el.eigenvalues().array() + 3.0;
        const auto perm2 = match_eigenvalues(shifted, en.eigenvalues());
        for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(en.eigenvalues()(perm2[k]) - shifted(k)), 1e-10);
    }
}

TEST(Moments, ThirdOrderPointMultiplicities) {
    // rank(M + 3I) = 2 at gamma12 = |Delta|: rows 1 and 4 coincide and row2 - row3 = 2i row1
    const auto reps = multiplicity_report(second_moment_system(fig1_preset().model()));
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_NEAR(std::abs(reps[0].lambda + 3.0), 0.0, 1e-8);
    EXPECT_EQ(reps[0].algebraic, 4);
    EXPECT_EQ(reps[0].geometric, 2);
    EXPECT_EQ(reps[0].jordan_blocks, (std::vector<int>{3, 1}));
    EXPECT_EQ(reps[0].lep_order, 3);
}

TEST(Moments, SupermodeTransformAndSymmetry) {
    const auto sys = second_moment_system(fig1_preset().model());
    const auto sup = transform_to_supermodes(sys);
    CVector d(4);
    d << 2, 0, 0, 4;
    EXPECT_LT((sup.noise - d).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(sup.basis[3], "<c2^dag c2>");
    const auto anti = check_moment_symmetry(sys, false);
    EXPECT_EQ(anti.classification, SymmetryClass::AntiPT);
    EXPECT_LT(anti.anti_pt_residual, 1e-13);
    const auto pt = check_moment_symmetry(sup, true);
    EXPECT_EQ(pt.classification, SymmetryClass::PassivePT);
    EXPECT_NEAR(pt.gauge_rate, 3.0, 1e-14);
    EXPECT_LT(pt.pt_residual_after_gauge, 1e-13);
}

TEST(Moments, RealFormIsRealWithSameSpectrum) {
    const auto three = load_model(R"({"modes": [{"omega": -1}, {"omega": 0.2}, {"omega": 1}],
        "chi": [[0, 0.3, 0], [0.3, 0, [0.1, 0.2]], [0, [0.1, -0.2], 0]],
        "gamma": [[2, 0.5, 0], [0.5, 2, [0.1, 0.3]], [0, [0.1, -0.3], 2]]})");
    auto off_ep = fig1_preset();
    off_ep.gamma12 = 0.4;
    for (const auto& sys : {second_moment_system(three), second_moment_system(off_ep.model())}) {
        const RMatrix r = real_form(sys);
        Eigen::EigenSolver<RMatrix> er(r, false);
        Eigen::ComplexEigenSolver<CMatrix> ec(sys.generator, false);
        const CVector a = er.eigenvalues();
        const auto perm = match_eigenvalues(a, ec.eigenvalues());
        for (Eigen::Index k = 0; k < a.size(); ++k) EXPECT_LT(std::abs(ec.eigenvalues()(perm[k]) - a(k)), 1e-10);
    }
    EXPECT_THROW(real_form(nhh_second_moment_system(three)), NumericalError);
    EXPECT_THROW(real_form(nhh_second_moment_system(off_ep.model())), NumericalError);
    EXPECT_THROW(real_form(transform_to_supermodes(second_moment_system(fig1_preset().model()))), ValidationError);
}
