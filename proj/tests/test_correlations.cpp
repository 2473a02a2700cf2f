#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "lep/correlations.hpp"

using namespace lep;

namespace {

// Permanent by summing over every permutation.
cplx permanent_by_enumeration(const CMatrix& a) {
    const int n = static_cast<int>(a.rows());
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    cplx total = 0.0;
    do {
        cplx prod = 1.0;
        for (int r = 0; r < n; ++r) prod *= a(r, p[static_cast<std::size_t>(r)]);
        total += prod;
    } while (std::next_permutation(p.begin(), p.end()));
    return total;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST(Correlations, ProbesAndParsing) {
    const auto c1 = supermode_probe(Supermode::C1);
    EXPECT_NEAR(c1.u(0).real(), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c1.u(1).real(), -1 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(parse_probe("a2", 3).u(1), cplx(1.0));
    EXPECT_THROW(parse_probe("a4", 3), ValidationError);
    EXPECT_THROW(parse_probe("c1", 3), ValidationError);
    EXPECT_THROW(parse_probe("b1", 2), ValidationError);
}

TEST(Correlations, G1MatchesClosedFormOffAndAtTheEp) {
    const RVector tau = RVector::LinSpaced(101, 0.0, 10.0);
    for (double g12 : {0.0, 0.4, 1.0, 1.7}) {
        BimodalParams p;
        p.omega1 = 0.3;
        p.omega2 = 1.3;  // Delta = -1, omega_bar = 0.8
        p.gamma12 = g12;
        for (auto sm : {Supermode::C1, Supermode::C2}) {
            const auto s = g1(p.model(), supermode_probe(sm), tau);
            double dev = 0.0;
            for (Eigen::Index i = 0; i < tau.size(); ++i)
                dev = std::max(dev, std::abs(s.values(i) - g1_bimodal_closed_form(3.0, g12, -1.0, 0.8, sm, tau(i))));
            EXPECT_LT(dev, 1e-10) << "gamma12 " << g12;
        }
    }
}

TEST(Correlations, EpEnvelopeIsLinear) {
    const auto eval = CoherenceEvaluator(fig1_preset().model(), supermode_probe(Supermode::C1));
    for (double t : {0.0, 0.5, 2.0, 7.5, 10.0}) EXPECT_NEAR(std::abs(eval(t)) * std::exp(1.5 * t), 1 + 0.5 * t, 1e-10);
    const auto c2 = CoherenceEvaluator(fig1_preset().model(), supermode_probe(Supermode::C2));
    for (double t : {0.5, 1.0}) EXPECT_NEAR(std::abs(c2(t)) * std::exp(1.5 * t), std::abs(1 - 0.5 * t), 1e-10);
    EXPECT_NEAR(eval.normalization(), 1.0, 1e-14);
    EXPECT_NEAR(eval.decay_rate(), 1.5, 1e-7);
}

TEST(Correlations, TtcfStartsAtSteadyStateRow) {
    auto p = fig1_preset();
    p.n_th = 0.2;
    RVector tau(2);
    tau << 0.0, 1.0;
    const CMatrix f = ttcf_first_order(p.model(), 0, tau);
    EXPECT_NEAR(std::abs(f(0, 0) - 0.2), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(f(1, 0)), 0.0, 1e-14);
    const auto s = ttcf(p.model(), mode_probe(2, 0), tau);
    EXPECT_NEAR(std::abs(s.values(1) - f(0, 1)), 0.0, 1e-14);
    RVector bad(2);
    bad << 1.0, 0.5;
    EXPECT_THROW(ttcf_first_order(p.model(), 0, bad), ValidationError);
}

TEST(Correlations, UnstableModelRejected) {
    ModelSpec s;
    s.n_modes = 1;
    s.omega = RVector::Zero(1);
    s.chi = CMatrix::Zero(1, 1);
    s.gamma = CMatrix::Zero(1, 1);
    RVector tau = RVector::LinSpaced(3, 0, 1);
    EXPECT_THROW(g1(validate(s), mode_probe(1, 0), tau), ValidationError);
}

TEST(Correlations, RyserAgreesWithEnumeration) {
    std::mt19937 rng(3);
    std::normal_distribution<double> n(0, 1);
    for (int dim = 1; dim <= 7; ++dim) {
        CMatrix a(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) a(r, c) = cplx(n(rng), n(rng));
        EXPECT_LT(std::abs(permanent(a) - permanent_by_enumeration(a)), 1e-10 * std::max(1.0, std::abs(permanent(a))));
    }
}

TEST(Correlations, WickCoherenceLimits) {
    for (int k = 1; k <= 5; ++k) {
        EXPECT_NEAR(g2k_wick(1.0, k), factorial(2 * k), 1e-9 * factorial(2 * k));
        EXPECT_NEAR(g2k_wick(0.0, k), factorial(k) * factorial(k), 1e-9);
    }
    const cplx g(0.3, -0.4);
    EXPECT_NEAR(g2k_wick(g, 1), 1.0 + std::norm(g), 1e-15);
    // k = 2: 4 + 16|g|^2 + 4|g|^4
    EXPECT_NEAR(g2k_wick(g, 2), 4 + 16 * std::norm(g) + 4 * std::norm(g) * std::norm(g), 1e-13);
    EXPECT_THROW(g2k_wick(g, 0), ValidationError);
    EXPECT_THROW(g2k_wick(g, 9), ValidationError);
    EXPECT_THROW(g2k_wick(1.5, 1), ValidationError);
}

TEST(Correlations, G2kSeriesDecaysToProductOfFactorials) {
    const RVector tau = RVector::LinSpaced(5, 0.0, 40.0);
    const auto s1 = g1(fig1_preset().model(), supermode_probe(Supermode::C2), tau);
    const auto s4 = g2k_series(s1, 2);
    EXPECT_EQ(s4.order, 4);
    EXPECT_NEAR(s4.values(0).real(), 24.0, 1e-12);
    EXPECT_NEAR(s4.values(4).real(), 4.0, 1e-12);
}
