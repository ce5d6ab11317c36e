#include "cvnn/register.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace cvnn {

LinearForm& LinearForm::add(std::size_t i, Cplx coeff) {
    for (auto& [idx, c] : terms) {
        if (idx == i) {
            c += coeff;
            return *this;
        }
    }
    terms.emplace_back(i, coeff);
    return *this;
}

LinearForm& LinearForm::add(const LinearForm& other, Cplx scale) {
    for (const auto& [i, c] : other.terms) add(i, scale * c);
    bias += scale * other.bias;
    return *this;
}

Cplx LinearForm::operator()(std::span<const Cplx> state) const {
    Cplx acc = bias;
    for (const auto& [i, c] : terms) {
        if (i >= state.size()) throw DimensionError(fmt::format("form references slot {} of {}", i, state.size()));
        acc += c * state[i];
    }
    return acc;
}

LinearForm LinearForm::compose(const std::vector<LinearForm>& view) const {
    LinearForm out = constant(bias);
    for (const auto& [i, c] : terms) {
        if (i >= view.size()) throw DimensionError(fmt::format("form references slot {} of {}", i, view.size()));
        out.add(view[i], c);
    }
    return out;
}

LinearForm LinearForm::normalized() const {
    LinearForm out = constant(bias);
    for (const auto& [i, c] : terms) out.add(i, c);
    std::erase_if(out.terms, [](const auto& t) { return t.second == Cplx{}; });
    std::sort(out.terms.begin(), out.terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

bool LinearForm::operator==(const LinearForm& o) const {
    const LinearForm a = normalized(), b = o.normalized();
    return a.bias == b.bias && a.terms == b.terms;
}

std::string to_string(SlotOp op) {
    switch (op) {
        case SlotOp::Id: return "id";
        case SlotOp::Conj: return "conj";
        case SlotOp::Raw: return "raw";
        case SlotOp::Mul: return "mul";
    }
    return "?";
}

std::string to_string(SlotRole role) {
    switch (role) {
        case SlotRole::InId: return "in_id";
        case SlotRole::InConj: return "in_conj";
        case SlotRole::OutAccum: return "out_accum";
        case SlotRole::Compute: return "compute";
        case SlotRole::Flush: return "flush";
        case SlotRole::ConstOne: return "const";
        case SlotRole::Carry: return "carry";
    }
    return "?";
}

std::string to_string(ProgramShape s) {
    switch (s) {
        case ProgramShape::Shallow: return "shallow";
        case ProgramShape::Poly: return "poly";
        case ProgramShape::Generic: return "generic";
    }
    return "?";
}

std::size_t RegisterProgram::width() const {
    std::size_t w = 0;
    for (const auto& l : layers) w = std::max(w, l.slots.size());
    return w;
}

std::vector<std::size_t> RegisterProgram::layer_widths() const {
    std::vector<std::size_t> out;
    for (const auto& l : layers) out.push_back(l.slots.size());
    return out;
}

void RegisterProgram::validate() const {
    if (t_init.cols() != n) throw DimensionError(fmt::format("t_init takes {} inputs, program has n={}", t_init.cols(), n));
    if (t_end.rows() != m) throw DimensionError(fmt::format("t_end yields {} outputs, program has m={}", t_end.rows(), m));
    std::size_t prev = t_init.rows();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        for (const auto& s : layers[li].slots) {
            const std::size_t want = s.op == SlotOp::Mul ? 2 : 1;
            if (s.args.size() != want)
                throw InvalidArgument(fmt::format("layer {}: {} slot needs {} operand(s)", li, to_string(s.op), want));
            for (const auto& f : s.args)
                for (const auto& [i, c] : f.terms)
                    if (i >= prev) throw DimensionError(fmt::format("layer {} references slot {} of {}", li, i, prev));
        }
        prev = layers[li].slots.size();
    }
    if (t_end.cols() != prev) throw DimensionError(fmt::format("t_end reads {} slots, last layer has {}", t_end.cols(), prev));
}

CVec eval_register(const RegisterProgram& prog, std::span<const Cplx> z, const Activation* act) {
    if (z.size() != prog.n) throw DimensionError(fmt::format("program takes {} inputs, got {}", prog.n, z.size()));
    CVec state = prog.t_init(z);
    for (const auto& layer : prog.layers) {
        CVec next(layer.slots.size());
        for (std::size_t k = 0; k < layer.slots.size(); ++k) {
            const Slot& s = layer.slots[k];
            const Cplx a = s.args.at(0)(state);
            switch (s.op) {
                case SlotOp::Id: next[k] = a; break;
                case SlotOp::Conj: next[k] = std::conj(a); break;
                case SlotOp::Raw:
                    if (!act) throw InvalidArgument("program has activation slots; pass an activation");
                    next[k] = (*act)(a);
                    break;
                case SlotOp::Mul: next[k] = apply_mul(s.kind, a, s.args.at(1)(state)); break;
            }
        }
        state = std::move(next);
    }
    return prog.t_end(state);
}

RegisterProgram shallow_to_register(const Cvnn& net) {
    if (net.depth() != 2) throw PreconditionError(fmt::format("expected a network with one hidden layer, got depth {}", net.depth()));
    const auto& v1 = net.maps()[0];
    const auto& v2 = net.maps()[1];
    const std::size_t n = v1.cols(), m = v2.rows(), w = v1.rows();
    const std::size_t c_slot = n;
    auto neuron_form = [&](std::size_t r) {
        LinearForm f = LinearForm::constant(v1.bias()[r]);
        for (std::size_t j = 0; j < n; ++j) f.add(j, v1.at(r, j));
        return f;
    };

    RegisterProgram p;
    p.n = n;
    p.m = m;
    p.shape = ProgramShape::Shallow;
    p.t_init = ComplexAffineMap::identity(n);
    for (std::size_t r = 0; r < w; ++r) {
        Layer l;
        for (std::size_t i = 0; i < n; ++i) l.slots.push_back(Slot::in_id(i));
        l.slots.push_back(Slot::raw(neuron_form(r)));
        for (std::size_t j = 0; j < m; ++j) {
            if (r == 0) {
                l.slots.push_back(Slot::out_accum(LinearForm::constant(0.0)));
            } else {
                LinearForm f = LinearForm::ref(n + 1 + j);
                f.add(c_slot, v2.at(j, r - 1));
                l.slots.push_back(Slot::out_accum(std::move(f)));
            }
        }
        p.layers.push_back(std::move(l));
    }
    const std::size_t width = n + m + 1;
    std::vector<Cplx> a(m * width, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        a[j * width + n + 1 + j] = 1.0;
        a[j * width + c_slot] = v2.at(j, w - 1);
    }
    p.t_end = ComplexAffineMap(m, width, std::move(a), v2.bias());
    return p;
}

unsigned PolyTerm::degree() const {
    unsigned d = 0;
    for (auto [a, b] : exps) d += a + b;
    return d;
}

namespace {

using Exps = std::vector<std::pair<unsigned, unsigned>>;

unsigned total_degree(const Exps& e) {
    unsigned d = 0;
    for (auto [a, b] : e) d += a + b;
    return d;
}

// Lower degree first; within a degree, higher powers of earlier variables first.
bool glex_less(const Exps& x, const Exps& y) {
    const unsigned dx = total_degree(x), dy = total_degree(y);
    if (dx != dy) return dx < dy;
    return x > y;
}

Cplx ipow(Cplx z, unsigned k) {
    Cplx r = 1.0;
    for (unsigned i = 0; i < k; ++i) r *= z;
    return r;
}

}  // namespace

PolyZZbar::PolyZZbar(std::size_t n, std::vector<PolyTerm> terms) : n_(n) {
    for (auto& t : terms) {
        if (t.exps.size() != n)
            throw DimensionError(fmt::format("monomial has {} exponent pairs, polynomial has n={}", t.exps.size(), n));
        if (!std::isfinite(t.coeff.real()) || !std::isfinite(t.coeff.imag()))
            throw InvalidArgument("non-finite polynomial coefficient");
        auto it = std::find_if(terms_.begin(), terms_.end(), [&](const PolyTerm& u) { return u.exps == t.exps; });
        if (it != terms_.end())
            it->coeff += t.coeff;
        else
            terms_.push_back(std::move(t));
    }
    std::erase_if(terms_, [](const PolyTerm& t) { return t.coeff == Cplx{}; });
    std::sort(terms_.begin(), terms_.end(), [](const PolyTerm& a, const PolyTerm& b) { return glex_less(a.exps, b.exps); });
}

unsigned PolyZZbar::degree() const {
    unsigned d = 0;
    for (const auto& t : terms_) d = std::max(d, t.degree());
    return d;
}

Cplx PolyZZbar::operator()(std::span<const Cplx> z) const {
    if (z.size() != n_) throw DimensionError(fmt::format("polynomial takes {} inputs, got {}", n_, z.size()));
    Cplx acc = 0.0;
    for (const auto& t : terms_) {
        Cplx v = t.coeff;
        for (std::size_t i = 0; i < n_; ++i) v *= ipow(z[i], t.exps[i].first) * ipow(std::conj(z[i]), t.exps[i].second);
        acc += v;
    }
    return acc;
}

Cplx PolyZZbar::constant_term() const {
    for (const auto& t : terms_)
        if (t.degree() == 0) return t.coeff;
    return 0.0;
}

std::vector<Exps> monomial_basis(std::size_t n, unsigned degree) {
    std::vector<Exps> out;
    std::vector<unsigned> flat(2 * n, 0);
    // Odometer over all flattened exponent vectors with sum <= degree.
    while (true) {
        Exps e(n);
        for (std::size_t i = 0; i < n; ++i) e[i] = {flat[2 * i], flat[2 * i + 1]};
        out.push_back(std::move(e));
        std::size_t k = 0;
        unsigned sum = 0;
        for (unsigned v : flat) sum += v;
        while (k < flat.size()) {
            if (sum < degree) {
                ++flat[k];
                break;
            }
            sum -= flat[k];
            flat[k] = 0;
            ++k;
        }
        if (k == flat.size()) break;
    }
    std::sort(out.begin(), out.end(), glex_less);
    return out;
}

namespace {

// Times the factor absorbed at step j (1-based) of l gets conjugated afterwards.
bool step_parity(MulKind kind, std::size_t j, std::size_t l) {
    switch (kind) {
        case MulKind::Mul1: return false;
        case MulKind::Mul2: return (l - j) % 2 == 1;
        case MulKind::Mul3: return (l - j + 1) % 2 == 1;
    }
    return false;
}

}  // namespace

Exps simulate_plan(const MonomialPlan& plan, MulKind kind, std::size_t n) {
    std::vector<std::pair<std::size_t, bool>> acc;
    auto conj_all = [&] {
        for (auto& f : acc) f.second = !f.second;
    };
    for (const auto& s : plan.steps) {
        if (s.var >= n) throw DimensionError(fmt::format("plan references variable {} of {}", s.var, n));
        switch (kind) {
            case MulKind::Mul1: acc.emplace_back(s.var, s.conj); break;
            case MulKind::Mul2:
                conj_all();
                acc.emplace_back(s.var, s.conj);
                break;
            case MulKind::Mul3:
                acc.emplace_back(s.var, s.conj);
                conj_all();
                break;
        }
    }
    Exps e(n, {0u, 0u});
    for (auto [v, c] : acc) (c ? e[v].second : e[v].first) += 1;
    return e;
}

MonomialPlan plan_monomial(const Exps& exps, MulKind kind) {
    std::vector<std::pair<std::size_t, bool>> factors;
    for (std::size_t i = 0; i < exps.size(); ++i) {
        for (unsigned k = 0; k < exps[i].first; ++k) factors.emplace_back(i, false);
        for (unsigned k = 0; k < exps[i].second; ++k) factors.emplace_back(i, true);
    }
    const std::size_t l = factors.size();
    MonomialPlan plan;
    for (std::size_t j = 1; j <= l; ++j) {
        const bool parity = step_parity(kind, j, l);
        // Prefer a factor that can be read from a plain register.
        auto it = std::find_if(factors.begin(), factors.end(), [&](const auto& f) { return f.second == parity; });
        if (it == factors.end()) it = factors.begin();
        plan.steps.push_back({it->first, it->second != parity});
        factors.erase(it);
    }
    return plan;
}

RegisterProgram poly_to_register(const std::vector<PolyZZbar>& components, MulKind kind) {
    if (components.empty()) throw InvalidArgument("need at least one polynomial component");
    const std::size_t n = components.front().n(), m = components.size();
    if (n == 0) throw InvalidArgument("polynomial needs at least one variable");
    for (const auto& c : components)
        if (c.n() != n) throw DimensionError("polynomial components disagree on the number of variables");

    const std::size_t u0 = n, w = 2 * n, v0 = 2 * n + 1, width = 2 * n + 1 + m;
    RegisterProgram p;
    p.n = n;
    p.m = m;
    p.shape = ProgramShape::Poly;
    p.kind = kind;
    p.t_init = ComplexAffineMap::identity(n);

    auto carry_regs = [&](Layer& l, bool refresh_conj) {
        for (std::size_t i = 0; i < n; ++i) l.slots.push_back(Slot::in_id(i));
        for (std::size_t i = 0; i < n; ++i) {
            if (refresh_conj)
                l.slots.push_back({SlotRole::InConj, SlotOp::Conj, MulKind::Mul1, {LinearForm::ref(i)}});
            else
                l.slots.push_back({SlotRole::Carry, SlotOp::Id, MulKind::Mul1, {LinearForm::ref(u0 + i)}});
        }
    };

    Layer first;
    for (std::size_t i = 0; i < n; ++i) first.slots.push_back(Slot::in_id(i));
    for (std::size_t i = 0; i < n; ++i) first.slots.push_back(Slot::in_conj(i));
    first.slots.push_back(Slot::const_value(1.0));
    for (std::size_t j = 0; j < m; ++j) first.slots.push_back(Slot::out_accum(LinearForm::constant(0.0)));
    p.layers.push_back(std::move(first));

    CVec constants(m, 0.0);
    for (std::size_t comp = 0; comp < m; ++comp) {
        for (const auto& term : components[comp].terms()) {
            if (term.degree() == 0) {
                constants[comp] += term.coeff;
                continue;
            }
            const MonomialPlan plan = plan_monomial(term.exps, kind);
            for (const auto& step : plan.steps) {
                Layer l;
                carry_regs(l, true);
                const std::size_t src = step.conj ? u0 + step.var : step.var;
                l.slots.push_back(Slot::mul(kind, LinearForm::ref(src), LinearForm::ref(w)));
                for (std::size_t j = 0; j < m; ++j) l.slots.push_back(Slot::out_accum(LinearForm::ref(v0 + j)));
                p.layers.push_back(std::move(l));
            }
            Layer flush;
            carry_regs(flush, false);
            flush.slots.push_back(Slot::const_value(1.0));
            for (std::size_t j = 0; j < m; ++j) {
                if (j == comp) {
                    LinearForm f = LinearForm::ref(v0 + j);
                    f.add(w, term.coeff);
                    flush.slots.push_back(Slot::flush(std::move(f)));
                } else {
                    flush.slots.push_back(Slot::out_accum(LinearForm::ref(v0 + j)));
                }
            }
            p.layers.push_back(std::move(flush));
        }
    }

    std::vector<Cplx> a(m * width, 0.0);
    for (std::size_t j = 0; j < m; ++j) a[j * width + v0 + j] = 1.0;
    p.t_end = ComplexAffineMap(m, width, std::move(a), std::move(constants));
    return p;
}

std::string to_string(LoweringStrategy s) {
    switch (s) {
        case LoweringStrategy::NonPoly_NMplus1: return "NonPoly_NMplus1";
        case LoweringStrategy::NonPoly_Conj_NMplus1: return "NonPoly_Conj_NMplus1";
        case LoweringStrategy::NonPoly_2N2Mplus1: return "NonPoly_2N2Mplus1";
        case LoweringStrategy::Poly_Wide_2N2Mplus12: return "Poly_Wide_2N2Mplus12";
        case LoweringStrategy::Poly_Narrow_2N2Mplus5: return "Poly_Narrow_2N2Mplus5";
        case LoweringStrategy::Poly_NMplus4: return "Poly_NMplus4";
    }
    return "?";
}

LoweringStrategy strategy_from_string(const std::string& s) {
    static const std::pair<const char*, LoweringStrategy> aliases[] = {
        {"nmplus1", LoweringStrategy::NonPoly_NMplus1},       {"conj-nmplus1", LoweringStrategy::NonPoly_Conj_NMplus1},
        {"2n2mplus1", LoweringStrategy::NonPoly_2N2Mplus1},   {"wide", LoweringStrategy::Poly_Wide_2N2Mplus12},
        {"narrow", LoweringStrategy::Poly_Narrow_2N2Mplus5}, {"nmplus4", LoweringStrategy::Poly_NMplus4},
    };
    for (auto [name, v] : aliases)
        if (s == name || s == to_string(v)) return v;
    throw InvalidArgument(fmt::format("unknown lowering strategy '{}'", s));
}

std::size_t width_budget(LoweringStrategy s, std::size_t n, std::size_t m) {
    switch (s) {
        case LoweringStrategy::NonPoly_NMplus1:
        case LoweringStrategy::NonPoly_Conj_NMplus1: return n + m + 1;
        case LoweringStrategy::NonPoly_2N2Mplus1: return 2 * n + 2 * m + 1;
        case LoweringStrategy::Poly_Wide_2N2Mplus12: return 2 * n + 2 * m + 12;
        case LoweringStrategy::Poly_Narrow_2N2Mplus5: return 2 * n + 2 * m + 5;
        case LoweringStrategy::Poly_NMplus4: return n + m + 4;
    }
    return 0;
}

bool is_poly_strategy(LoweringStrategy s) {
    return s == LoweringStrategy::Poly_Wide_2N2Mplus12 || s == LoweringStrategy::Poly_Narrow_2N2Mplus5 ||
           s == LoweringStrategy::Poly_NMplus4;
}

}  // namespace cvnn
