#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "cvnn/register.hpp"

namespace cvnn {

namespace {

using OptForm = std::optional<LinearForm>;

std::vector<LinearForm> identity_view(std::size_t k) {
    std::vector<LinearForm> v;
    for (std::size_t i = 0; i < k; ++i) v.push_back(LinearForm::ref(i));
    return v;
}

std::vector<LinearForm> rows_of(const ComplexAffineMap& map) {
    std::vector<LinearForm> out;
    for (std::size_t r = 0; r < map.rows(); ++r) {
        LinearForm f = LinearForm::constant(map.bias()[r]);
        for (std::size_t c = 0; c < map.cols(); ++c)
            if (map.at(r, c) != Cplx{}) f.add(c, map.at(r, c));
        out.push_back(std::move(f));
    }
    return out;
}

ComplexAffineMap to_map(const std::vector<LinearForm>& rows, std::size_t cols) {
    std::vector<Cplx> a(rows.size() * cols, 0.0);
    CVec b(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        b[r] = rows[r].bias;
        for (const auto& [i, c] : rows[r].terms) {
            if (i >= cols) throw DimensionError(fmt::format("form references column {} of {}", i, cols));
            a[r * cols + i] += c;
        }
    }
    return ComplexAffineMap(rows.size(), cols, std::move(a), std::move(b));
}

LinearForm compose_checked(const LinearForm& f, const std::vector<OptForm>& view) {
    LinearForm out = LinearForm::constant(f.bias);
    for (const auto& [i, c] : f.terms) {
        if (c == Cplx{}) continue;
        if (i >= view.size() || !view[i])
            throw IncompatibleError(fmt::format("register {} is not available in this layout", i));
        out.add(*view[i], c);
    }
    return out;
}

bool all_id(const Layer& l) {
    return std::all_of(l.slots.begin(), l.slots.end(), [](const Slot& s) { return s.op == SlotOp::Id; });
}

bool has_op(const RegisterProgram& p, SlotOp op) {
    for (const auto& l : p.layers)
        for (const auto& s : l.slots)
            if (s.op == op) return true;
    return false;
}

struct Carrier {
    ShallowBlock block;
    std::size_t out;
};

struct Carriers {
    std::optional<Carrier> id;           // Id slots
    std::optional<ShallowBlock> paired;  // Id/Conj slots sharing an operand
    std::optional<Carrier> conj;         // lone Conj slots
    std::optional<MulResult> mul;        // Mul slots
};

// One hidden layer per program layer: phi feeds the neurons, psi rebuilds the slots.
Pipeline lower_engine(const RegisterProgram& prog, const Activation& act, const Carriers& car) {
    Pipeline pipe(act);
    pipe.push(prog.t_init);
    std::size_t prev = prog.t_init.rows();
    bool any_hidden = false;
    for (const auto& layer : prog.layers) {
        const std::size_t k = layer.slots.size();
        std::vector<LinearForm> phi;
        std::vector<LinearForm> psi(k);
        std::vector<bool> done(k, false);

        auto place = [&](const ShallowBlock& blk, const std::vector<LinearForm>& inputs,
                         const std::vector<std::pair<std::size_t, std::size_t>>& outs) {
            const std::size_t base = phi.size();
            for (std::size_t r = 0; r < blk.pre.rows(); ++r) {
                LinearForm f = LinearForm::constant(blk.pre.bias()[r]);
                for (std::size_t c = 0; c < blk.pre.cols(); ++c) f.add(inputs[c], blk.pre.at(r, c));
                phi.push_back(std::move(f));
            }
            for (auto [o, s] : outs) {
                LinearForm g = LinearForm::constant(blk.post.bias()[o]);
                for (std::size_t r = 0; r < blk.post.cols(); ++r) g.add(base + r, blk.post.at(o, r));
                psi[s] = std::move(g);
                done[s] = true;
            }
        };

        if (car.paired) {
            for (std::size_t s = 0; s < k; ++s) {
                if (layer.slots[s].op != SlotOp::Conj) continue;
                for (std::size_t t = 0; t < k; ++t) {
                    const Slot& cand = layer.slots[t];
                    if (done[t] || cand.op != SlotOp::Id || cand.args[0].is_constant()) continue;
                    if (!(cand.args[0] == layer.slots[s].args[0])) continue;
                    place(*car.paired, {layer.slots[s].args[0]}, {{0, t}, {1, s}});
                    break;
                }
            }
        }
        for (std::size_t s = 0; s < k; ++s) {
            if (done[s]) continue;
            const Slot& slot = layer.slots[s];
            switch (slot.op) {
                case SlotOp::Id:
                    if (slot.args[0].is_constant()) {
                        psi[s] = slot.args[0];
                        done[s] = true;
                    } else {
                        if (!car.id) throw IncompatibleError("no carrier for identity slots under this strategy");
                        place(car.id->block, {slot.args[0]}, {{car.id->out, s}});
                    }
                    break;
                case SlotOp::Conj:
                    if (slot.args[0].is_constant()) {
                        psi[s] = LinearForm::constant(std::conj(slot.args[0].bias));
                        done[s] = true;
                    } else {
                        if (!car.conj) throw IncompatibleError("no carrier for conjugation slots under this strategy");
                        place(car.conj->block, {slot.args[0]}, {{car.conj->out, s}});
                    }
                    break;
                case SlotOp::Raw: {
                    phi.push_back(slot.args[0]);
                    psi[s] = LinearForm::ref(phi.size() - 1);
                    done[s] = true;
                    break;
                }
                case SlotOp::Mul:
                    if (!car.mul) throw IncompatibleError("no carrier for multiplication slots under this strategy");
                    if (slot.kind != car.mul->kind)
                        throw IncompatibleError(fmt::format("program multiplies with {} but the activation yields {}",
                                                            to_string(slot.kind), to_string(car.mul->kind)));
                    place(car.mul->block, slot.args, {{0, s}});
                    break;
            }
        }
        if (phi.empty()) {
            pipe.push(to_map(psi, prev));
        } else {
            pipe.push(to_map(phi, prev));
            pipe.push_activation(phi.size());
            pipe.push(to_map(psi, phi.size()));
            any_hidden = true;
        }
        prev = k;
    }
    if (!any_hidden) throw InvalidArgument("program has no layer that needs a neuron");
    pipe.push(prog.t_end);
    return pipe;
}

// Replaces every neuron of a network for the conjugated activation by an
// activation neuron followed by a conjugation block.
Pipeline deconjugate(const Pipeline& p, const ShallowBlock& conj, const Activation& act) {
    Pipeline out(act);
    const Cplx a = conj.pre.at(0, 0), b = conj.pre.bias()[0];
    const Cplx c = conj.post.at(0, 0), d = conj.post.bias()[0];
    for (const auto& step : p.steps()) {
        if (const auto* m = std::get_if<ComplexAffineMap>(&step)) {
            out.push(*m);
            continue;
        }
        const std::size_t w = std::get<ActivationLayer>(step).width;
        out.push_activation(w);
        std::vector<Cplx> da(w * w, 0.0), dc(w * w, 0.0);
        for (std::size_t i = 0; i < w; ++i) {
            da[i * w + i] = a;
            dc[i * w + i] = c;
        }
        out.push(ComplexAffineMap(w, w, std::move(da), CVec(w, b)));
        out.push_activation(w);
        out.push(ComplexAffineMap(w, w, std::move(dc), CVec(w, d)));
    }
    return out;
}

// Each layer becomes a layer of conjugations (activation slots kept) followed
// by a layer conjugating every slot.
RegisterProgram split_conjugated(const RegisterProgram& prog) {
    RegisterProgram out = prog;
    out.layers.clear();
    for (const auto& l : prog.layers) {
        Layer a, b;
        for (std::size_t s = 0; s < l.slots.size(); ++s) {
            Slot x = l.slots[s];
            switch (x.op) {
                case SlotOp::Id:
                    if (x.args[0].is_constant())
                        x.args[0] = LinearForm::constant(std::conj(x.args[0].bias));
                    else
                        x.op = SlotOp::Conj;
                    break;
                case SlotOp::Conj: x.op = SlotOp::Id; break;
                case SlotOp::Raw: break;
                case SlotOp::Mul: throw IncompatibleError("multiplication slots cannot be split into conjugations");
            }
            a.slots.push_back(std::move(x));
            b.slots.push_back({l.slots[s].role, SlotOp::Conj, MulKind::Mul1, {LinearForm::ref(s)}});
        }
        out.layers.push_back(std::move(a));
        out.layers.push_back(std::move(b));
    }
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw PreconditionError(what);
}

}  // namespace

RegisterProgram fuse_affine_layers(const RegisterProgram& prog) {
    prog.validate();
    RegisterProgram out = prog;
    out.layers.clear();
    std::vector<LinearForm> view = identity_view(prog.t_init.rows());
    for (const auto& l : prog.layers) {
        Layer c;
        for (const auto& s : l.slots) {
            Slot x = s;
            for (auto& f : x.args) f = f.compose(view).normalized();
            c.slots.push_back(std::move(x));
        }
        if (all_id(c)) {
            view.clear();
            for (const auto& s : c.slots) view.push_back(s.args[0]);
        } else {
            view = identity_view(c.slots.size());
            out.layers.push_back(std::move(c));
        }
    }
    std::vector<LinearForm> end = rows_of(prog.t_end);
    for (auto& f : end) f = f.compose(view);
    const std::size_t cols = out.layers.empty() ? prog.t_init.rows() : out.layers.back().slots.size();
    out.t_end = to_map(end, cols);
    return out;
}

RegisterProgram expand_mul_layers(const RegisterProgram& prog, const ShallowBlock& mul, bool single_conj) {
    if (prog.shape != ProgramShape::Poly) throw InvalidArgument("expansion needs a polynomial program");
    const std::size_t n = prog.n, m = prog.m;
    const std::size_t psize = 2 * n + 1 + m, pw = 2 * n, pv = 2 * n + 1;
    for (const auto& l : prog.layers)
        if (l.slots.size() != psize) throw InvalidArgument("polynomial program layers must have the register layout");
    if (mul.in_dim() != 2 || mul.out_dim() != 1) throw InvalidArgument("multiplication block must map C^2 to C");

    auto is_mul_layer = [&](const Layer& l) { return l.slots[pw].op == SlotOp::Mul; };
    auto need = [&](const Layer& l) -> std::optional<std::size_t> {
        for (const auto& [i, c] : l.slots[pw].args[0].terms)
            if (c != Cplx{} && i >= n && i < 2 * n) return i - n;
        return std::nullopt;
    };
    auto next_need = [&](std::size_t from) -> std::size_t {
        for (std::size_t t = from; t < prog.layers.size(); ++t)
            if (is_mul_layer(prog.layers[t])) return need(prog.layers[t]).value_or(0);
        return 0;
    };

    const std::size_t nconj = single_conj ? 1 : n;
    const std::size_t e_win = n + nconj, e_c = e_win + 1, e_o = e_win + 2, e_v = e_win + 3;
    const std::size_t wb = mul.width();
    CVec base_value(wb);
    for (std::size_t r = 0; r < wb; ++r) base_value[r] = mul.act(mul.pre.bias()[r]);

    RegisterProgram out = prog;
    out.layers.clear();
    std::vector<OptForm> view;
    for (std::size_t i = 0; i < prog.t_init.rows(); ++i) view.emplace_back(LinearForm::ref(i));

    auto conj_slot = [&](const LinearForm& src, SlotRole role) {
        return Slot{role, SlotOp::Conj, MulKind::Mul1, {src}};
    };

    for (std::size_t t = 0; t < prog.layers.size(); ++t) {
        const Layer& l = prog.layers[t];
        if (!is_mul_layer(l)) {
            Layer e;
            std::vector<OptForm> nv(psize);
            auto take = [&](std::size_t ps) {
                Slot x = l.slots[ps];
                for (auto& f : x.args) f = compose_checked(f, view);
                nv[ps] = LinearForm::ref(e.slots.size());
                e.slots.push_back(std::move(x));
            };
            for (std::size_t i = 0; i < n; ++i) take(i);
            if (single_conj)
                take(n + next_need(t + 1));
            else
                for (std::size_t i = 0; i < n; ++i) take(n + i);
            take(pw);
            for (std::size_t j = 0; j < m; ++j) take(pv + j);
            out.layers.push_back(std::move(e));
            view = std::move(nv);
            continue;
        }

        const LinearForm& xform = l.slots[pw].args[0];
        const LinearForm& accform = l.slots[pw].args[1];
        const std::size_t k = need(l).value_or(0);
        std::size_t q_var = k;
        for (std::size_t r = 0; r < wb; ++r) {
            Layer e;
            std::vector<OptForm> ev(psize);  // logical registers in terms of the previous sublayer
            if (r > 0) {
                for (std::size_t i = 0; i < n; ++i) ev[i] = LinearForm::ref(i);
                if (single_conj)
                    ev[n + q_var] = LinearForm::ref(n);
                else
                    for (std::size_t i = 0; i < n; ++i) ev[n + i] = LinearForm::ref(n + i);
            }
            const std::vector<OptForm>& src = r == 0 ? view : ev;
            std::vector<LinearForm> zsrc;
            for (std::size_t i = 0; i < n; ++i)
                zsrc.push_back(r == 0 ? compose_checked(l.slots[i].args[0], view) : LinearForm::ref(i));
            for (std::size_t i = 0; i < n; ++i) e.slots.push_back({SlotRole::InId, SlotOp::Id, MulKind::Mul1, {zsrc[i]}});
            if (single_conj) {
                const std::size_t kq = r + 1 < wb ? k : next_need(t + 1);
                e.slots.push_back(conj_slot(zsrc[kq], SlotRole::InConj));
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const LinearForm u = r == 0 ? compose_checked(l.slots[n + i].args[0], view) : LinearForm::ref(i);
                    e.slots.push_back(conj_slot(u, SlotRole::InConj));
                }
            }
            const LinearForm wop = r == 0 ? compose_checked(accform, view) : LinearForm::ref(e_win);
            e.slots.push_back({SlotRole::Carry, SlotOp::Id, MulKind::Mul1, {wop}});
            LinearForm cf = LinearForm::constant(mul.pre.bias()[r]);
            cf.add(compose_checked(xform, src), mul.pre.at(r, 0));
            cf.add(wop, mul.pre.at(r, 1));
            e.slots.push_back(Slot::raw(cf.normalized()));
            if (r == 0) {
                e.slots.push_back(Slot::out_accum(LinearForm::constant(0.0)));
            } else {
                // Partial sums skip the value at zero input so they stay O(1/h).
                LinearForm o = LinearForm::ref(e_o);
                o.add(e_c, mul.post.at(0, r - 1));
                o.bias = -mul.post.at(0, r - 1) * base_value[r - 1];
                e.slots.push_back(Slot::out_accum(std::move(o)));
            }
            for (std::size_t j = 0; j < m; ++j)
                e.slots.push_back(Slot::out_accum(r == 0 ? compose_checked(l.slots[pv + j].args[0], view) : LinearForm::ref(e_v + j)));
            out.layers.push_back(std::move(e));
            if (single_conj && r + 1 == wb) q_var = next_need(t + 1);
        }
        std::vector<OptForm> nv(psize);
        for (std::size_t i = 0; i < n; ++i) nv[i] = LinearForm::ref(i);
        if (single_conj)
            nv[n + q_var] = LinearForm::ref(n);
        else
            for (std::size_t i = 0; i < n; ++i) nv[n + i] = LinearForm::ref(n + i);
        LinearForm w = LinearForm::ref(e_o);
        w.add(e_c, mul.post.at(0, wb - 1));
        w.bias = mul.post.bias()[0];
        for (std::size_t r = 0; r + 1 < wb; ++r) w.bias += mul.post.at(0, r) * base_value[r];
        nv[pw] = std::move(w);
        for (std::size_t j = 0; j < m; ++j) nv[pv + j] = LinearForm::ref(e_v + j);
        view = std::move(nv);
    }

    std::vector<LinearForm> end = rows_of(prog.t_end);
    for (auto& f : end) f = compose_checked(f, view);
    const std::size_t cols = out.layers.empty() ? prog.t_init.rows() : out.layers.back().slots.size();
    out.t_end = to_map(end, cols);
    out.shape = ProgramShape::Generic;
    return out;
}

BlockSites find_block_sites(const Activation& act, const ToleranceProfile& prof) {
    BlockSites s;
    if (auto p = best_identity_point(act, prof)) s.identity = p->z0;
    if (auto p = best_conj_point(act, prof)) s.conj = p->z0;
    if (auto p = best_pair_point(act, prof)) s.pair = p->z0;
    s.second = find_nonzero_second_point(act, prof);
    return s;
}

namespace {

BlockSites sites_for(const Activation& act, const LowerOptions& opt) {
    return opt.sites ? *opt.sites : find_block_sites(act, opt.prof);
}

// NMplus4 works with the conjugated activation when only conjugation points exist.
bool nmplus4_conjugates(const BlockSites& s) { return !s.identity && s.conj; }

}  // namespace

Activation program_activation(const Activation& act, LoweringStrategy s, const LowerOptions& opt) {
    if (s == LoweringStrategy::NonPoly_Conj_NMplus1) return conjugated(act);
    if (s == LoweringStrategy::Poly_NMplus4 && nmplus4_conjugates(sites_for(act, opt))) return conjugated(act);
    return act;
}

MulKind strategy_mul_kind(const Activation& act, LoweringStrategy s, const LowerOptions& opt) {
    if (!is_poly_strategy(s)) throw InvalidArgument(fmt::format("{} does not multiply", to_string(s)));
    const BlockSites sites = sites_for(act, opt);
    std::optional<SecondPoint> sp = sites.second;
    if (s == LoweringStrategy::Poly_NMplus4 && nmplus4_conjugates(sites))
        sp = find_nonzero_second_point(conjugated(act), opt.prof);
    if (!sp) throw PreconditionError("activation has no point with a nonzero second derivative");
    return mul_kind_for(sp->which);
}

LoweringStrategy strategy_for(Verdict v, const Activation& act, const ToleranceProfile& prof) {
    switch (v) {
        case Verdict::UniversalNonPoly_NMplus1:
            return best_identity_point(act, prof) ? LoweringStrategy::NonPoly_NMplus1 : LoweringStrategy::NonPoly_Conj_NMplus1;
        case Verdict::UniversalNonPoly_2N2Mplus1: return LoweringStrategy::NonPoly_2N2Mplus1;
        case Verdict::UniversalPoly_NMplus4: return LoweringStrategy::Poly_NMplus4;
        case Verdict::UniversalPoly_2N2Mplus5: return LoweringStrategy::Poly_Narrow_2N2Mplus5;
        default: break;
    }
    throw PreconditionError(fmt::format("verdict {} admits no lowering", to_string(v)));
}

Lowered lower_detailed(const RegisterProgram& prog, const Activation& act, LoweringStrategy s, double h,
                       const LowerOptions& opt) {
    prog.validate();
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument(fmt::format("step h must be positive, got {}", h));
    const ToleranceProfile& prof = opt.prof;
    const BlockSites sites = sites_for(act, opt);
    const RegisterProgram fused = fuse_affine_layers(prog);
    std::vector<std::string> warnings;
    const bool nested = s == LoweringStrategy::Poly_Narrow_2N2Mplus5 || s == LoweringStrategy::Poly_NMplus4;
    const double hc = opt.carrier_h.value_or(nested ? h * h * h : h);
    if (!(hc > 0.0) || !std::isfinite(hc)) throw InvalidArgument(fmt::format("carrier step must be positive, got {}", hc));

    auto finish = [&](Pipeline p) {
        Cvnn net = p.fuse();
        return Lowered{std::move(p), std::move(net), std::move(warnings)};
    };
    auto need_no_mul = [&] {
        if (has_op(prog, SlotOp::Mul)) throw IncompatibleError(fmt::format("{} cannot realize multiplication slots", to_string(s)));
    };

    switch (s) {
        case LoweringStrategy::NonPoly_NMplus1: {
            need_no_mul();
            if (has_op(fused, SlotOp::Conj)) throw IncompatibleError("NonPoly_NMplus1 cannot realize conjugation slots");
            require(sites.identity.has_value(),
                    "activation has no point with d != 0 = dbar; NonPoly_Conj_NMplus1 may apply");
            Carriers car;
            car.id = Carrier{identity_block(act, *sites.identity, hc, prof), 0};
            return finish(lower_engine(fused, act, car));
        }
        case LoweringStrategy::NonPoly_Conj_NMplus1: {
            need_no_mul();
            require(sites.conj.has_value(), "activation has no point with d = 0 != dbar");
            const ShallowBlock cb = conj_block(act, *sites.conj, hc, prof);
            if (opt.conj_via_double) {
                Carriers car;
                car.conj = Carrier{cb, 0};
                return finish(lower_engine(split_conjugated(fused), act, car));
            }
            const Activation cact = conjugated(act);
            Carriers car;
            car.id = Carrier{identity_block(cact, *sites.conj, hc, prof), 0};
            return finish(deconjugate(lower_engine(fused, cact, car), cb, act));
        }
        case LoweringStrategy::NonPoly_2N2Mplus1: {
            need_no_mul();
            if (has_op(fused, SlotOp::Conj)) throw IncompatibleError("NonPoly_2N2Mplus1 cannot realize conjugation slots");
            require(sites.pair.has_value(), "activation has no point with both first derivatives nonzero");
            Carriers car;
            car.id = Carrier{pair_block(act, *sites.pair, hc, prof), 0};
            return finish(lower_engine(fused, act, car));
        }
        case LoweringStrategy::Poly_Wide_2N2Mplus12:
        case LoweringStrategy::Poly_Narrow_2N2Mplus5: {
            require(sites.second.has_value(), "activation has no point with a nonzero second derivative");
            ShallowBlock idc = id_conj_pair_block(act, sites.pair, sites.identity, sites.conj, hc, prof);
            warnings.insert(warnings.end(), idc.warnings.begin(), idc.warnings.end());
            MulResult mr = mul_block(act, sites.second->z0, h, prof);
            if (has_op(prog, SlotOp::Mul) && mr.kind != prog.kind)
                throw IncompatibleError(fmt::format("program multiplies with {} but the activation yields {}",
                                                    to_string(prog.kind), to_string(mr.kind)));
            Carriers car;
            car.id = Carrier{idc, 0};
            car.paired = idc;
            car.conj = Carrier{idc, 1};
            if (s == LoweringStrategy::Poly_Wide_2N2Mplus12) {
                car.mul = mr;
                return finish(lower_engine(fused, act, car));
            }
            return finish(lower_engine(expand_mul_layers(fused, mr.block, false), act, car));
        }
        case LoweringStrategy::Poly_NMplus4: {
            const bool conj_route = nmplus4_conjugates(sites);
            require(sites.identity || sites.conj, "activation has neither an identity point nor a conjugation point");
            const Activation eact = conj_route ? conjugated(act) : act;
            const Cplx id_pt = conj_route ? *sites.conj : *sites.identity;
            std::optional<Cplx> pair_pt = sites.pair;
            std::optional<Cplx> conj_pt = conj_route ? sites.identity : sites.conj;
            const auto sp = conj_route ? find_nonzero_second_point(eact, prof) : sites.second;
            require(sp.has_value(), "activation has no point with a nonzero second derivative");
            ShallowBlock idc = id_conj_pair_block(eact, pair_pt, id_pt, conj_pt, hc, prof);
            warnings.insert(warnings.end(), idc.warnings.begin(), idc.warnings.end());
            MulResult mr = mul_block(eact, sp->z0, h, prof);
            if (has_op(prog, SlotOp::Mul) && mr.kind != prog.kind)
                throw IncompatibleError(fmt::format("program multiplies with {} but the activation yields {}",
                                                    to_string(prog.kind), to_string(mr.kind)));
            Carriers car;
            car.id = Carrier{identity_block(eact, id_pt, hc, prof), 0};
            car.paired = idc;
            car.conj = Carrier{idc, 1};
            Pipeline p = lower_engine(expand_mul_layers(fused, mr.block, true), eact, car);
            if (conj_route) p = deconjugate(p, conj_block(act, *sites.conj, hc, prof), act);
            return finish(std::move(p));
        }
    }
    throw InvalidArgument("unknown strategy");
}

Cvnn lower(const RegisterProgram& prog, const Activation& act, LoweringStrategy s, double h, const LowerOptions& opt) {
    return lower_detailed(prog, act, s, h, opt).net;
}

}  // namespace cvnn
