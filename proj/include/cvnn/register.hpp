#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvnn/blocks.hpp"
#include "cvnn/core.hpp"

namespace cvnn {

// sum_k coeff_k * state[index_k] + bias
struct LinearForm {
    std::vector<std::pair<std::size_t, Cplx>> terms;
    Cplx bias{};

    static LinearForm ref(std::size_t i, Cplx coeff = 1.0) { return {{{i, coeff}}, {}}; }
    static LinearForm constant(Cplx c) { return {{}, c}; }

    LinearForm& add(std::size_t i, Cplx coeff);
    LinearForm& add(const LinearForm& other, Cplx scale = 1.0);
    Cplx operator()(std::span<const Cplx> state) const;
    // Substitutes state[i] -> view[i].
    LinearForm compose(const std::vector<LinearForm>& view) const;
    bool is_constant() const { return terms.empty(); }
    // Sorted terms with zero coefficients dropped.
    LinearForm normalized() const;
    bool operator==(const LinearForm& o) const;
};

enum class SlotOp { Id, Conj, Raw, Mul };
enum class SlotRole { InId, InConj, OutAccum, Compute, Flush, ConstOne, Carry };

std::string to_string(SlotOp op);
std::string to_string(SlotRole role);

struct Slot {
    SlotRole role;
    SlotOp op;
    MulKind kind = MulKind::Mul1;  // Mul slots only
    std::vector<LinearForm> args;  // one operand, two for Mul

    static Slot in_id(std::size_t src) { return {SlotRole::InId, SlotOp::Id, MulKind::Mul1, {LinearForm::ref(src)}}; }
    static Slot in_conj(std::size_t src) { return {SlotRole::InConj, SlotOp::Conj, MulKind::Mul1, {LinearForm::ref(src)}}; }
    static Slot const_value(Cplx c) { return {SlotRole::ConstOne, SlotOp::Id, MulKind::Mul1, {LinearForm::constant(c)}}; }
    static Slot out_accum(LinearForm f) { return {SlotRole::OutAccum, SlotOp::Id, MulKind::Mul1, {std::move(f)}}; }
    static Slot flush(LinearForm f) { return {SlotRole::Flush, SlotOp::Id, MulKind::Mul1, {std::move(f)}}; }
    static Slot raw(LinearForm f) { return {SlotRole::Compute, SlotOp::Raw, MulKind::Mul1, {std::move(f)}}; }
    static Slot mul(MulKind k, LinearForm a, LinearForm b) {
        return {SlotRole::Compute, SlotOp::Mul, k, {std::move(a), std::move(b)}};
    }
};

struct Layer {
    std::vector<Slot> slots;
};

enum class ProgramShape { Shallow, Poly, Generic };
std::string to_string(ProgramShape s);

// z -> t_end(L_N(...L_1(t_init z))). Each layer maps the previous state to a
// new state slot by slot; Raw slots apply the activation, Mul slots multiply.
struct RegisterProgram {
    std::size_t n = 0;
    std::size_t m = 0;
    ProgramShape shape = ProgramShape::Generic;
    MulKind kind = MulKind::Mul1;  // Poly programs
    ComplexAffineMap t_init = ComplexAffineMap::identity(1);
    std::vector<Layer> layers;
    ComplexAffineMap t_end = ComplexAffineMap::identity(1);

    std::size_t width() const;
    std::vector<std::size_t> layer_widths() const;
    // Throws on dangling slot references or dimension mismatches.
    void validate() const;
};

CVec eval_register(const RegisterProgram& prog, std::span<const Cplx> z, const Activation* act = nullptr);
inline CVec eval_register(const RegisterProgram& prog, std::span<const Cplx> z, const Activation& act) {
    return eval_register(prog, z, &act);
}

// Exact rewrite of a depth-2 network into width n+m+1.
RegisterProgram shallow_to_register(const Cvnn& net);

// Polynomial in z_1..z_n and their conjugates.
struct PolyTerm {
    Cplx coeff;
    std::vector<std::pair<unsigned, unsigned>> exps;  // (deg z_i, deg conj z_i)
    unsigned degree() const;
};

class PolyZZbar {
public:
    explicit PolyZZbar(std::size_t n, std::vector<PolyTerm> terms = {});

    std::size_t n() const { return n_; }
    const std::vector<PolyTerm>& terms() const { return terms_; }
    unsigned degree() const;
    Cplx operator()(std::span<const Cplx> z) const;
    Cplx constant_term() const;

private:
    std::size_t n_;
    std::vector<PolyTerm> terms_;  // merged, graded lexicographic order
};

// Every exponent vector with total degree <= degree, in graded lexicographic order.
std::vector<std::vector<std::pair<unsigned, unsigned>>> monomial_basis(std::size_t n, unsigned degree);

struct RegChoice {
    std::size_t var;
    bool conj;
    bool operator==(const RegChoice&) const = default;
};

struct MonomialPlan {
    std::vector<RegChoice> steps;
};

// Folds acc <- mul(x_j, acc) from acc = 1 and returns the exponents it produces.
std::vector<std::pair<unsigned, unsigned>> simulate_plan(const MonomialPlan& plan, MulKind kind, std::size_t n);

MonomialPlan plan_monomial(const std::vector<std::pair<unsigned, unsigned>>& exps, MulKind kind);

// Width 2n+m+1 program with layout (z, conj z, w, v).
RegisterProgram poly_to_register(const std::vector<PolyZZbar>& components, MulKind kind);

enum class LoweringStrategy {
    NonPoly_NMplus1,
    NonPoly_Conj_NMplus1,
    NonPoly_2N2Mplus1,
    Poly_Wide_2N2Mplus12,
    Poly_Narrow_2N2Mplus5,
    Poly_NMplus4,
};

std::string to_string(LoweringStrategy s);
LoweringStrategy strategy_from_string(const std::string& s);
std::size_t width_budget(LoweringStrategy s, std::size_t n, std::size_t m);
bool is_poly_strategy(LoweringStrategy s);

// Points where each block type can be built; computed once per activation.
struct BlockSites {
    std::optional<Cplx> identity;
    std::optional<Cplx> conj;
    std::optional<Cplx> pair;
    std::optional<SecondPoint> second;
};

BlockSites find_block_sites(const Activation& act, const ToleranceProfile& prof = {});

struct LowerOptions {
    ToleranceProfile prof;
    std::optional<BlockSites> sites;
    // NonPoly_Conj_NMplus1: realize each layer as two stacked conjugation
    // layers instead of building the network for the conjugated activation.
    bool conj_via_double = false;
    // Step of the identity and conjugation carriers. Defaults to h, or h^3 for
    // the narrow strategies whose carriers transport O(1/h) partial sums.
    std::optional<double> carrier_h;
};

struct Lowered {
    Pipeline unfused;
    Cvnn net;
    std::vector<std::string> warnings;
};

// The activation whose exact semantics the program must be evaluated with for
// this strategy (the conjugate for the conjugation variants).
Activation program_activation(const Activation& act, LoweringStrategy s, const LowerOptions& opt = {});
// The multiplication a Poly strategy realizes with this activation.
MulKind strategy_mul_kind(const Activation& act, LoweringStrategy s, const LowerOptions& opt = {});
// Picks the strategy matching a universal verdict.
LoweringStrategy strategy_for(Verdict v, const Activation& act, const ToleranceProfile& prof = {});

Lowered lower_detailed(const RegisterProgram& prog, const Activation& act, LoweringStrategy s, double h,
                       const LowerOptions& opt = {});
Cvnn lower(const RegisterProgram& prog, const Activation& act, LoweringStrategy s, double h,
           const LowerOptions& opt = {});

// Program transforms used by the lowering; exposed for testing.
RegisterProgram fuse_affine_layers(const RegisterProgram& prog);
RegisterProgram expand_mul_layers(const RegisterProgram& prog, const ShallowBlock& mul, bool single_conj);

}  // namespace cvnn
