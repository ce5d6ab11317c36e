#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cvnn/blocks.hpp"
#include "support.hpp"

using namespace cvnn;
using namespace cvnn::testing;

namespace {

const Cplx I{0.0, 1.0};
const CompactBox kUnit = CompactBox::square(1, -1.0, 1.0);
const CompactBox kBi = CompactBox::square(2, -1.0, 1.0);
const GridSpec kGrid{21};

Activation quad(Cplx a, Cplx b, Cplx c, Cplx d = 0.0, Cplx e = 0.0) {
    return get_activation("quadratic", {{"a_re", a.real()}, {"a_im", a.imag()}, {"b_re", b.real()}, {"b_im", b.imag()},
                                        {"c_re", c.real()}, {"c_im", c.imag()}, {"d_re", d.real()}, {"d_im", d.imag()},
                                        {"e_re", e.real()}, {"e_im", e.imag()}});
}

double err(const ShallowBlock& b, const CompactBox& box = kUnit, const GridSpec& g = kGrid) {
    return block_error(b, block_target(b.kind), box, g);
}

}  // namespace

TEST_CASE("identity block") {
    const Activation id = quad(0.0, 0.0, 0.0, 1.0);
    for (double h : {1.0, 0.3, 1e-3}) CHECK(err(identity_block(id, 0.5, h)) < 1e-12);
    const Activation card = get_activation("cardioid");
    const double e1 = err(identity_block(card, 1.0, 1e-1));
    const double e2 = err(identity_block(card, 1.0, 1e-2));
    const double e3 = err(identity_block(card, 1.0, 1e-3));
    CHECK(e1 > e2);
    CHECK(e2 > e3);
    CHECK(e3 < 1e-2);
    CHECK(identity_block(card, 1.0, 1e-3).width() == 1);
    CHECK_THROWS_AS(identity_block(get_activation("re_square"), 1.0, 1e-2), PreconditionError);
    CHECK_THROWS_AS(identity_block(card, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("conjugation block") {
    CHECK(err(conj_block(quad(0.0, 0.0, 0.0, 0.0, 1.0), 0.0, 0.7)) < 1e-12);
    CHECK_THROWS_AS(conj_block(get_activation("z_plus_zbar_sq"), 1.0, 1e-2), PreconditionError);
    const Activation zb_z2 = quad(1.0, 0.0, 0.0, 0.0, 1.0);
    CHECK(err(conj_block(zb_z2, 0.0, 1e-3)) < 1e-2);
}

TEST_CASE("pair block") {
    const ShallowBlock exact = pair_block(quad(0.0, 0.0, 0.0, 1.0, 1.0), 0.0, 0.5);
    CHECK(exact.width() == 2);
    CHECK(exact.out_dim() == 2);
    CHECK(err(exact) < 1e-12);

    const Activation mr = get_activation("modrelu", {{"b", -1.0}});
    double prev_id = INFINITY, prev_cj = INFINITY;
    for (double h : {1e-1, 1e-2, 1e-3}) {
        const ShallowBlock b = pair_block(mr, 2.0, h);
        double e_id = 0.0, e_cj = 0.0;
        for (const auto& z : sample_box(kUnit, kGrid)) {
            const CVec v = b(z);
            e_id = std::max(e_id, std::abs(v[0] - z[0]));
            e_cj = std::max(e_cj, std::abs(v[1] - std::conj(z[0])));
        }
        CHECK(e_id < prev_id);
        CHECK(e_cj < prev_cj);
        // Euclidean error per point lies between the worse component and sqrt(2) times it.
        const double e = err(b);
        CHECK(e >= std::max(e_id, e_cj));
        CHECK(e <= std::sqrt(2.0) * std::max(e_id, e_cj) * (1 + 1e-12));
        prev_id = e_id;
        prev_cj = e_cj;
    }
    CHECK(err(pair_block(get_activation("re_square"), 1.0, 1e-3)) < 1e-2);
}

TEST_CASE("id-conj pair routing") {
    const ToleranceProfile p;
    const ShallowBlock rs = id_conj_pair_block(get_activation("re_square"), p, 1e-3);
    CHECK(rs.route == "pair");
    CHECK(rs.kind == BlockKind::IdConjPair);
    CHECK(err(rs) < 1e-2);
    const ShallowBlock zz = id_conj_pair_block(get_activation("z_plus_zbar_sq"), p, 1e-3);
    CHECK(zz.width() == 2);
    CHECK(err(zz) < 1e-2);
    CHECK_THROWS_AS(id_conj_pair_block(get_activation("r_affine"), p, 1e-3), InconclusiveError);
    CHECK_THROWS_AS(id_conj_pair_block(get_activation("z_plus_zbar_sq"), std::nullopt, Cplx(0.0), std::nullopt, 1e-3),
                    InconclusiveError);
}

TEST_CASE("two-point route warns about leftover derivatives") {
    // Identity at 0 (dbar = 0) and a conjugation point where d leaks through.
    const Activation act = quad(0.0, 0.0, 0.5, 1.0, 0.0);
    const ShallowBlock b = id_conj_pair_block(act, std::nullopt, Cplx(0.0), Cplx(1.0), 1e-3);
    CHECK(b.route == "two_point");
    CHECK_FALSE(b.warnings.empty());
}

TEST_CASE("square blocks") {
    const auto rs = square_block(get_activation("re_square"), 0.0, 0.5);
    CHECK(rs.which == SecondWhich::ZZbar);
    CHECK(rs.block.kind == BlockKind::SquareZZbar);
    CHECK(err(rs.block) < 1e-10);
    const auto z2 = square_block(quad(1.0, 0.0, 0.0), 0.0, 0.5);
    CHECK(z2.which == SecondWhich::Z2);
    CHECK(err(z2.block) < 1e-10);
    const auto zb = square_block(get_activation("z_plus_zbar_sq"), 0.0, 0.5);
    CHECK(zb.which == SecondWhich::Zbar2);
    CHECK(zb.block.width() == 4);
    CHECK(err(zb.block) < 1e-10);
    CHECK_THROWS_AS(square_block(get_activation("r_affine"), 0.0, 0.5), PreconditionError);
}

TEST_CASE("polarization identity") {
    const Cplx z = 1.0, w = I;
    const Cplx lhs = (0.25 + 0.25 * I) * std::norm(z + w) + (-0.25 + 0.25 * I) * std::norm(z - w) -
                     0.5 * I * std::norm(z - I * w);
    CHECK(std::abs(lhs - z * std::conj(w)) < 1e-15);
    CHECK(std::abs(lhs + I) < 1e-15);
}

TEST_CASE("multiplication blocks") {
    const auto m2 = mul_block(get_activation("re_square"), 0.0, 1e-2);
    CHECK(m2.kind == MulKind::Mul2);
    CHECK(m2.block.width() == 12);
    CHECK(err(m2.block, kBi, GridSpec(9)) < 1e-2);
    const auto m3 = mul_block(get_activation("z_plus_zbar_sq"), 0.0, 0.5);
    CHECK(m3.kind == MulKind::Mul3);
    CHECK(m3.block.width() == 8);
    CHECK(err(m3.block, kBi, GridSpec(9)) < 1e-10);
    const auto m1 = mul_block(quad(1.0, 0.0, 0.0), 0.0, 0.5);
    CHECK(m1.kind == MulKind::Mul1);
    CHECK(m1.block.width() == 8);
    CHECK(err(m1.block, kBi, GridSpec(9)) < 1e-10);
    CHECK(mul_kind_for(SecondWhich::ZZbar) == MulKind::Mul2);
    CHECK(mul_kind_for(SecondWhich::Z2) == MulKind::Mul1);
    CHECK(mul_kind_for(SecondWhich::Zbar2) == MulKind::Mul3);
}

TEST_CASE("multiplication error is bounded by its square errors") {
    const Activation act = get_activation("tanh_re");
    const Cplx z0{0.4, 0.0};
    const CompactBox wide = CompactBox::square(1, -2.0, 2.0);
    for (double h : {1e-1, 3e-2}) {
        const auto sq = square_block(act, z0, h);
        REQUIRE(sq.which == SecondWhich::ZZbar);
        const double se = err(sq.block, wide, GridSpec(81));
        const double me = err(mul_block(act, z0, h).block, kBi, GridSpec(9));
        const double weights = std::abs(0.25 + 0.25 * I) + std::abs(-0.25 + 0.25 * I) + 0.5;
        CHECK(me <= 1.05 * weights * se);
    }
}

TEST_CASE("quadratic activations give exact square and product blocks for every h") {
    Rng rng(12);
    for (int t = 0; t < 10; ++t) {
        const Activation act = quad(rng.cnormal(), rng.cnormal(), rng.cnormal(), rng.cnormal(), rng.cnormal());
        const Cplx z0 = rng.cnormal(0.5);
        for (double h : {1.0, 0.25, 0.01}) {
            const auto sq = square_block(act, z0, h);
            CHECK(err(sq.block) < 1e-10 * std::max(1.0, sq.block.coeff_scale * h * h));
            const auto mu = mul_block(act, z0, h);
            CHECK(err(mu.block, kBi, GridSpec(7)) < 1e-10 * std::max(1.0, mu.block.coeff_scale * h * h));
        }
    }
}

TEST_CASE("recorded coefficient scale matches the post map") {
    const Activation card = get_activation("cardioid"), rs = get_activation("re_square");
    for (double h : {1e-1, 1e-2, 1e-3}) {
        auto ratio = [](const ShallowBlock& b) { return b.post.max_abs_coeff() / b.coeff_scale; };
        for (const ShallowBlock& b : {identity_block(card, 1.0, h), pair_block(rs, 1.0, h),
                                      square_block(rs, 0.0, h).block, mul_block(rs, 0.0, h).block}) {
            CAPTURE(to_string(b.kind));
            CHECK(ratio(b) <= 10.0);
            CHECK(ratio(b) >= 0.1);
        }
        CHECK(identity_block(card, 1.0, h).coeff_scale == doctest::Approx(1.0 / h));
        CHECK(square_block(rs, 0.0, h).block.coeff_scale == doctest::Approx(0.5 / (h * h)));
    }
}

TEST_CASE("errors shrink along the schedule until the float floor") {
    struct Case {
        const char* name;
        Cplx z0;
    };
    const ToleranceProfile p;
    for (const Case& c : {Case{"cardioid", 1.0}, Case{"tanh_re", 0.3}, Case{"exp_re", 0.2}}) {
        CAPTURE(c.name);
        const Activation act = get_activation(c.name);
        std::vector<std::function<ShallowBlock(double)>> builders;
        const FirstWirtinger f = first_derivatives(act, c.z0, p);
        if (std::abs(f.dbar) <= p.zero_tol) builders.push_back([&](double h) { return identity_block(act, c.z0, h); });
        else builders.push_back([&](double h) { return pair_block(act, c.z0, h); });
        builders.push_back([&](double h) { return square_block(act, c.z0, h).block; });
        for (const auto& build : builders) {
            double prev = INFINITY;
            for (int k = 0; k <= 5; ++k) {
                const double h = 0.1 * std::pow(2.0, -k);
                const ShallowBlock b = build(h);
                const double e = err(b, b.in_dim() == 1 ? kUnit : kBi);
                if (prev < 1e-9) break;
                CHECK(e <= 0.75 * prev);
                prev = e;
            }
        }
    }
}

TEST_CASE("h schedule and tuning") {
    const auto hs = default_h_schedule();
    CHECK(hs.front() == 0.1);
    CHECK(hs.back() >= 1e-6);
    CHECK(hs.back() * 0.5 < 1e-6);
    for (std::size_t i = 1; i < hs.size(); ++i) CHECK(hs[i] == hs[i - 1] * 0.5);
    // V-shaped error: decreases to 0.0125 then rises.
    const TunedH t = tune_h([](double h) { return std::abs(std::log2(h / 0.0125)) + 1.0; }, hs);
    CHECK(t.h == 0.0125);
    CHECK(t.error == 1.0);
    CHECK(t.errors.size() < hs.size());
}

TEST_CASE("kind names round-trip") {
    for (BlockKind k : {BlockKind::Identity, BlockKind::Conjugation, BlockKind::PairIdConj, BlockKind::SquareZZbar,
                        BlockKind::SquareZ2, BlockKind::SquareZbar2, BlockKind::Mul1, BlockKind::Mul2, BlockKind::Mul3,
                        BlockKind::IdConjPair})
        CHECK(block_kind_from_string(to_string(k)) == k);
    for (MulKind k : {MulKind::Mul1, MulKind::Mul2, MulKind::Mul3}) CHECK(mul_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(block_kind_from_string("Cube"), InvalidArgument);
    CHECK(apply_mul(MulKind::Mul2, 2.0, I) == Cplx(0.0, -2.0));
    CHECK(apply_mul(MulKind::Mul3, 2.0, I) == Cplx(0.0, -2.0));
    CHECK(apply_mul(MulKind::Mul1, 2.0, I) == Cplx(0.0, 2.0));
}
