#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvnn/register.hpp"
#include "support.hpp"

using namespace cvnn;
using namespace cvnn::testing;

namespace {

using Exps = std::vector<std::pair<unsigned, unsigned>>;
const Cplx I{0.0, 1.0};
constexpr MulKind kKinds[] = {MulKind::Mul1, MulKind::Mul2, MulKind::Mul3};

PolyZZbar random_poly(Rng& rng, std::size_t n, unsigned degree, std::size_t terms) {
    const auto basis = monomial_basis(n, degree);
    std::vector<PolyTerm> t;
    for (std::size_t k = 0; k < terms; ++k) {
        const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(basis.size()));
        t.push_back({rng.cnormal(), basis[std::min(idx, basis.size() - 1)]});
    }
    return PolyZZbar(n, std::move(t));
}

// Independent evaluation of a monomial straight from its exponents.
Cplx monomial(const Exps& e, const CVec& z) {
    Cplx v = 1.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        for (unsigned k = 0; k < e[i].first; ++k) v *= z[i];
        for (unsigned k = 0; k < e[i].second; ++k) v *= std::conj(z[i]);
    }
    return v;
}

CVec eval_poly(const std::vector<PolyZZbar>& ps, const CVec& z) {
    CVec out;
    for (const auto& p : ps) out.push_back(p(z));
    return out;
}

}  // namespace

TEST_CASE("linear forms") {
    LinearForm f = LinearForm::ref(2, 3.0);
    f.add(0, I).add(2, -1.0);
    f.bias = 0.5;
    const CVec s{1.0, 7.0, 2.0};
    CHECK(f(s) == Cplx(4.5, 1.0));
    const LinearForm g = f.compose({LinearForm::ref(1), LinearForm::constant(9.0), LinearForm::ref(0, 2.0)});
    CHECK(g(CVec{1.0, 10.0}) == f(CVec{10.0, 9.0, 2.0}));
    CHECK(f.normalized() == f);
    LinearForm z = LinearForm::ref(1, 1.0);
    z.add(1, -1.0);
    CHECK(z.normalized().is_constant());
}

TEST_CASE("shallow networks rewrite exactly") {
    Rng rng(31);
    const Activation card = get_activation("cardioid");
    SUBCASE("one input, one output, three neurons") {
        const Cvnn net = random_net(rng, {1, 3, 1}, card);
        const RegisterProgram p = shallow_to_register(net);
        CHECK(p.width() == 3);
        for (int i = 0; i < 200; ++i) {
            const CVec z = random_vec(rng, 1, 2.0);
            CHECK(max_diff(eval_register(p, z, card), net(z)) < 1e-12);
        }
    }
    SUBCASE("constant network") {
        const Cvnn net({ComplexAffineMap::zero(2, 1), ComplexAffineMap(1, 2, {0.0, 0.0}, {{2.0, -1.0}})}, card);
        const RegisterProgram p = shallow_to_register(net);
        CHECK(eval_register(p, CVec{0.3}, card)[0] == Cplx(2.0, -1.0));
    }
    SUBCASE("single neuron") {
        const Cvnn net = random_net(rng, {2, 1, 3}, card);
        const RegisterProgram p = shallow_to_register(net);
        CHECK(p.width() == 2 + 3 + 1);
        std::size_t raws = 0;
        for (const auto& l : p.layers)
            for (const auto& s : l.slots) raws += s.op == SlotOp::Raw;
        CHECK(raws == 1);
    }
    SUBCASE("random suite") {
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + t % 3, m = 1 + (t / 3) % 3, w = 1 + t % 8;
            const Cvnn net = random_net(rng, {n, w, m}, card);
            const RegisterProgram p = shallow_to_register(net);
            CHECK(p.width() == n + m + 1);
            for (int i = 0; i < 100; ++i) {
                const CVec z = random_vec(rng, n, 2.0);
                const CVec want = net(z);
                CHECK(max_diff(eval_register(p, z, card), want) < 1e-12 * (1.0 + norm2(want)));
            }
        }
    }
    CHECK_THROWS_AS(shallow_to_register(random_net(rng, {1, 2, 2, 1}, card)), PreconditionError);
}

TEST_CASE("monomial plans") {
    CHECK(plan_monomial({{1, 0}, {0, 1}}, MulKind::Mul2).steps == std::vector<RegChoice>{{1, false}, {0, false}});
    CHECK(plan_monomial({{2, 0}}, MulKind::Mul1).steps == std::vector<RegChoice>{{0, false}, {0, false}});
    const Exps zb2{{0, 2}};
    CHECK(simulate_plan(plan_monomial(zb2, MulKind::Mul3), MulKind::Mul3, 1) == zb2);
    // The folded chain for z1 conj(z2) under Mul2: acc = z2, then z1 * conj(acc).
    const CVec z{{0.3, 0.4}, {-1.1, 0.2}};
    CHECK(std::abs(apply_mul(MulKind::Mul2, z[0], apply_mul(MulKind::Mul2, z[1], 1.0)) - z[0] * std::conj(z[1])) < 1e-15);
}

TEST_CASE("plans are sound for every small monomial") {
    for (std::size_t n = 1; n <= 2; ++n) {
        for (const Exps& e : monomial_basis(n, 3)) {
            unsigned deg = 0;
            for (auto [a, b] : e) deg += a + b;
            if (deg == 0) continue;
            for (MulKind kind : kKinds) {
                CAPTURE(to_string(kind));
                const MonomialPlan plan = plan_monomial(e, kind);
                REQUIRE(plan.steps.size() == deg);
                CHECK(simulate_plan(plan, kind, n) == e);
                // Brute force over every conjugation choice for the same variable order.
                bool chosen_valid = false;
                std::size_t valid = 0;
                for (unsigned mask = 0; mask < (1u << deg); ++mask) {
                    MonomialPlan alt = plan;
                    for (unsigned j = 0; j < deg; ++j) alt.steps[j].conj = (mask >> j) & 1u;
                    const bool ok = simulate_plan(alt, kind, n) == e;
                    valid += ok;
                    if (ok && alt.steps == plan.steps) chosen_valid = true;
                }
                CHECK(chosen_valid);
                CHECK(valid >= 1);
                // The symbolic product also matches numerically.
                Rng rng(deg);
                const CVec z = random_vec(rng, n);
                Cplx acc = 1.0;
                for (const RegChoice& s : plan.steps)
                    acc = apply_mul(kind, s.conj ? std::conj(z[s.var]) : z[s.var], acc);
                CHECK(std::abs(acc - monomial(e, z)) < 1e-14);
            }
        }
    }
}

TEST_CASE("polynomials compile exactly") {
    Rng rng(41);
    SUBCASE("examples") {
        const PolyZZbar sq(1, {{1.0, {{2, 0}}}});
        const PolyZZbar zb2z(1, {{1.0, {{0, 2}}}, {1.0, {{1, 0}}}});
        const PolyZZbar two(2, {{3.0, {{1, 0}, {0, 1}}}, {-I, {{0, 0}, {0, 0}}}});
        for (MulKind kind : kKinds) {
            for (const PolyZZbar& p : {sq, zb2z, two}) {
                const RegisterProgram prog = poly_to_register({p}, kind);
                CHECK(prog.width() == 2 * p.n() + 2);
                for (int i = 0; i < 100; ++i) {
                    const CVec z = random_vec(rng, p.n(), 1.5);
                    CHECK(std::abs(eval_register(prog, z)[0] - p(z)) < 1e-12 * (1.0 + std::abs(p(z))));
                }
            }
        }
    }
    SUBCASE("constant program") {
        const RegisterProgram prog = poly_to_register({PolyZZbar(2, {{{1.0, -2.0}, {{0, 0}, {0, 0}}}})}, MulKind::Mul2);
        CHECK(eval_register(prog, CVec{0.4, -0.1})[0] == Cplx(1.0, -2.0));
    }
    SUBCASE("random suite") {
        for (int t = 0; t < 60; ++t) {
            const std::size_t n = 1 + t % 3, m = 1 + (t / 3) % 3;
            const MulKind kind = kKinds[t % 3];
            std::vector<PolyZZbar> comps;
            for (std::size_t j = 0; j < m; ++j) comps.push_back(random_poly(rng, n, 4, 6));
            const RegisterProgram prog = poly_to_register(comps, kind);
            CHECK(prog.width() == 2 * n + m + 1);
            for (int i = 0; i < 20; ++i) {
                const CVec z = random_vec(rng, n, 1.2);
                const CVec want = eval_poly(comps, z);
                const CVec got = eval_register(prog, z);
                for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(got[j] - want[j]) <= 1e-10 * (1.0 + std::abs(want[j])));
            }
        }
    }
    CHECK_THROWS_AS(poly_to_register({PolyZZbar(1), PolyZZbar(2)}, MulKind::Mul1), DimensionError);
}

TEST_CASE("polynomial terms merge and sort") {
    const PolyZZbar p(1, {{1.0, {{1, 0}}}, {2.0, {{0, 0}}}, {3.0, {{1, 0}}}, {1.0, {{0, 2}}}});
    REQUIRE(p.terms().size() == 3);
    CHECK(p.terms()[0].exps == Exps{{0, 0}});
    CHECK(p.terms()[1].coeff == Cplx(4.0));
    CHECK(p.degree() == 2);
    CHECK(p.constant_term() == Cplx(2.0));
    CHECK(monomial_basis(1, 2).size() == 6);
    CHECK(monomial_basis(2, 2).size() == 15);
    CHECK(monomial_basis(3, 4).size() == 210);
}

TEST_CASE("program validation") {
    RegisterProgram p = poly_to_register({PolyZZbar(1, {{1.0, {{1, 1}}}})}, MulKind::Mul2);
    CHECK_NOTHROW(p.validate());
    p.layers[1].slots[0].args[0] = LinearForm::ref(99);
    CHECK_THROWS(p.validate());
}

TEST_CASE("strategy names and budgets") {
    for (auto s : {LoweringStrategy::NonPoly_NMplus1, LoweringStrategy::NonPoly_Conj_NMplus1,
                   LoweringStrategy::NonPoly_2N2Mplus1, LoweringStrategy::Poly_Wide_2N2Mplus12,
                   LoweringStrategy::Poly_Narrow_2N2Mplus5, LoweringStrategy::Poly_NMplus4})
        CHECK(strategy_from_string(to_string(s)) == s);
    CHECK(strategy_from_string("narrow") == LoweringStrategy::Poly_Narrow_2N2Mplus5);
    CHECK_THROWS_AS(strategy_from_string("tiny"), InvalidArgument);
    CHECK(width_budget(LoweringStrategy::NonPoly_NMplus1, 2, 3) == 6);
    CHECK(width_budget(LoweringStrategy::NonPoly_Conj_NMplus1, 2, 3) == 6);
    CHECK(width_budget(LoweringStrategy::NonPoly_2N2Mplus1, 2, 3) == 11);
    CHECK(width_budget(LoweringStrategy::Poly_Wide_2N2Mplus12, 2, 3) == 22);
    CHECK(width_budget(LoweringStrategy::Poly_Narrow_2N2Mplus5, 2, 3) == 15);
    CHECK(width_budget(LoweringStrategy::Poly_NMplus4, 2, 3) == 9);
}

TEST_CASE("affine layers fuse away") {
    Rng rng(5);
    const RegisterProgram p = poly_to_register({random_poly(rng, 2, 3, 5)}, MulKind::Mul2);
    const RegisterProgram f = fuse_affine_layers(p);
    CHECK(f.layers.size() < p.layers.size());
    for (const auto& l : f.layers) {
        bool compute = false;
        for (const auto& s : l.slots) compute |= s.op == SlotOp::Mul || s.op == SlotOp::Raw || s.op == SlotOp::Conj;
        CHECK(compute);
    }
    for (int i = 0; i < 50; ++i) {
        const CVec z = random_vec(rng, 2);
        CHECK(max_diff(eval_register(f, z), eval_register(p, z)) < 1e-12);
    }
}

TEST_CASE("multiplication layers expand through the block") {
    // z + conj(z)^2 makes the product block exact, so the expansion is too.
    const Activation act = get_activation("z_plus_zbar_sq");
    const ShallowBlock mul = mul_block(act, 0.0, 0.5).block;
    Rng rng(6);
    const RegisterProgram p = poly_to_register({random_poly(rng, 2, 3, 5), random_poly(rng, 2, 2, 3)}, MulKind::Mul3);
    for (bool single : {false, true}) {
        const RegisterProgram e = expand_mul_layers(p, mul, single);
        for (const auto& l : e.layers)
            for (const auto& s : l.slots) CHECK(s.op != SlotOp::Mul);
        for (int i = 0; i < 30; ++i) {
            const CVec z = random_vec(rng, 2);
            CHECK(max_diff(eval_register(e, z, act), eval_register(p, z)) < 1e-9);
        }
    }
}

TEST_CASE("lowered networks stay within the width budget") {
    Rng rng(7);
    const Activation card = get_activation("cardioid"), ccard = get_activation("conj:cardioid"),
                     mr = get_activation("modrelu", {{"b", -1.0}}), rs = get_activation("re_square"),
                     zz = get_activation("z_plus_zbar_sq");
    for (std::size_t n = 1; n <= 3; ++n) {
        for (std::size_t m = 1; m <= 3; ++m) {
            CAPTURE(n);
            CAPTURE(m);
            const Cvnn shallow = random_net(rng, {n, 3, m}, card);
            const RegisterProgram sp = shallow_to_register(shallow);
            std::vector<PolyZZbar> comps;
            for (std::size_t j = 0; j < m; ++j) comps.push_back(random_poly(rng, n, 2, 3));
            const struct {
                LoweringStrategy s;
                const Activation* act;
                bool poly;
            } cases[] = {{LoweringStrategy::NonPoly_NMplus1, &card, false},
                         {LoweringStrategy::NonPoly_Conj_NMplus1, &ccard, false},
                         {LoweringStrategy::NonPoly_2N2Mplus1, &mr, false},
                         {LoweringStrategy::Poly_Wide_2N2Mplus12, &rs, true},
                         {LoweringStrategy::Poly_Narrow_2N2Mplus5, &rs, true},
                         {LoweringStrategy::Poly_NMplus4, &zz, true}};
            for (const auto& c : cases) {
                CAPTURE(to_string(c.s));
                const RegisterProgram prog =
                    c.poly ? poly_to_register(comps, strategy_mul_kind(*c.act, c.s)) : sp;
                const Cvnn net = lower(prog, *c.act, c.s, 1e-2);
                CHECK(net.width() <= width_budget(c.s, n, m));
                CHECK(net.input_dim() == n);
                CHECK(net.output_dim() == m);
            }
        }
    }
}

TEST_CASE("fused and unfused lowerings agree") {
    Rng rng(8);
    const Activation rs = get_activation("re_square");
    const RegisterProgram p = poly_to_register({PolyZZbar(1, {{1.0, {{0, 2}}}, {1.0, {{1, 0}}}})}, MulKind::Mul2);
    for (auto s : {LoweringStrategy::Poly_Wide_2N2Mplus12, LoweringStrategy::Poly_Narrow_2N2Mplus5}) {
        const Lowered low = lower_detailed(p, rs, s, 1e-2);
        for (int i = 0; i < 50; ++i) {
            const CVec z = random_vec(rng, 1);
            CHECK(max_diff(low.net(z), low.unfused(z)) < 1e-12 * (1.0 + low.net.max_abs_coeff()));
        }
    }
    const Activation card = get_activation("cardioid");
    const Lowered low = lower_detailed(shallow_to_register(random_net(rng, {2, 4, 2}, card)), card,
                                       LoweringStrategy::NonPoly_NMplus1, 1e-3);
    for (int i = 0; i < 50; ++i) {
        const CVec z = random_vec(rng, 2);
        CHECK(max_diff(low.net(z), low.unfused(z)) < 1e-12 * (1.0 + low.net.max_abs_coeff()));
    }
}

TEST_CASE("lowering error shrinks with h") {
    Rng rng(9);
    const CompactBox box = CompactBox::square(1, -1.0, 1.0);
    const auto pts = sample_box(box, GridSpec(11));
    auto sup = [&](const Cvnn& net, const RegisterProgram& p, const Activation& act) {
        double e = 0.0;
        for (const auto& z : pts) e = std::max(e, max_diff(net(z), eval_register(p, z, act)));
        return e;
    };
    const Activation card = get_activation("cardioid");
    const RegisterProgram sp = shallow_to_register(random_net(rng, {1, 3, 1}, card, 0.5));
    const Activation zz = get_activation("z_plus_zbar_sq");
    const RegisterProgram pp = poly_to_register({PolyZZbar(1, {{1.0, {{1, 1}}}, {0.5, {{0, 1}}}})}, MulKind::Mul3);
    for (auto [prog, act, s] : {std::tuple{&sp, &card, LoweringStrategy::NonPoly_NMplus1},
                                std::tuple{&pp, &zz, LoweringStrategy::Poly_NMplus4}}) {
        CAPTURE(to_string(s));
        double best = INFINITY, first = 0.0;
        for (double h : {1e-1, 1e-2, 1e-3}) {
            const double e = sup(lower(*prog, *act, s, h), *prog, *act);
            if (h == 1e-1) first = e;
            best = std::min(best, e);
        }
        CHECK(best < first);
        CHECK(best < 1e-2);
    }
}

TEST_CASE("strategy selection") {
    const ToleranceProfile p;
    CHECK(strategy_for(Verdict::UniversalNonPoly_NMplus1, get_activation("cardioid"), p) ==
          LoweringStrategy::NonPoly_NMplus1);
    CHECK(strategy_for(Verdict::UniversalNonPoly_NMplus1, get_activation("conj:cardioid"), p) ==
          LoweringStrategy::NonPoly_Conj_NMplus1);
    CHECK(strategy_for(Verdict::UniversalNonPoly_2N2Mplus1, get_activation("modrelu"), p) ==
          LoweringStrategy::NonPoly_2N2Mplus1);
    CHECK(strategy_for(Verdict::UniversalPoly_2N2Mplus5, get_activation("re_square"), p) ==
          LoweringStrategy::Poly_Narrow_2N2Mplus5);
    CHECK(strategy_for(Verdict::UniversalPoly_NMplus4, get_activation("z_plus_zbar_sq"), p) ==
          LoweringStrategy::Poly_NMplus4);
    CHECK_THROWS(strategy_for(Verdict::NonUniversalHolomorphic, get_activation("exp"), p));
    CHECK(strategy_mul_kind(get_activation("re_square"), LoweringStrategy::Poly_Narrow_2N2Mplus5) == MulKind::Mul2);
    CHECK(strategy_mul_kind(get_activation("z_plus_zbar_sq"), LoweringStrategy::Poly_NMplus4) == MulKind::Mul3);
}

TEST_CASE("incompatible programs are refused") {
    Rng rng(10);
    const Activation card = get_activation("cardioid");
    const RegisterProgram sp = shallow_to_register(random_net(rng, {1, 2, 1}, card));
    const RegisterProgram pp = poly_to_register({PolyZZbar(1, {{1.0, {{2, 0}}}})}, MulKind::Mul2);
    CHECK_THROWS(lower(pp, card, LoweringStrategy::NonPoly_NMplus1, 1e-2));
    CHECK_THROWS(lower(sp, get_activation("re_square"), LoweringStrategy::Poly_Narrow_2N2Mplus5, 1e-2));
    CHECK_THROWS(lower(sp, get_activation("re_square"), LoweringStrategy::NonPoly_NMplus1, 1e-2));
    CHECK_THROWS_AS(lower(sp, card, LoweringStrategy::NonPoly_NMplus1, -1.0), InvalidArgument);
}
