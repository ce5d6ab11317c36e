#include "cvnn/serialize.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace cvnn {

using json = nlohmann::ordered_json;

namespace {

json cplx(Cplx z) { return json::array({z.real(), z.imag()}); }

Cplx cplx_of(const json& j) {
    if (!j.is_array() || j.size() != 2) throw InvalidArgument("expected a [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

json map_json(const ComplexAffineMap& m) {
    json mat = json::array(), bias = json::array();
    for (Cplx v : m.matrix()) mat.push_back(cplx(v));
    for (Cplx v : m.bias()) bias.push_back(cplx(v));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"matrix", mat}, {"bias", bias}};
}

ComplexAffineMap map_of(const json& j) {
    std::vector<Cplx> a;
    CVec b;
    for (const auto& v : j.at("matrix")) a.push_back(cplx_of(v));
    for (const auto& v : j.at("bias")) b.push_back(cplx_of(v));
    return ComplexAffineMap(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), std::move(a), std::move(b));
}

json activation_json(const Activation& act) {
    json params = json::object();
    for (const auto& [k, v] : act.params()) params[k] = v;
    return {{"name", act.name()}, {"params", params}};
}

Activation activation_of(const json& j) {
    ParamMap p;
    if (j.contains("params"))
        for (const auto& [k, v] : j.at("params").items()) p[k] = v.get<double>();
    return get_activation(j.at("name").get<std::string>(), p);
}

json network_json(const Cvnn& net) {
    json maps = json::array();
    for (const auto& m : net.maps()) maps.push_back(map_json(m));
    return {{"input_dim", net.input_dim()},
            {"output_dim", net.output_dim()},
            {"activation", activation_json(net.activation())},
            {"affine_maps", maps}};
}

Cvnn network_of(const json& j) {
    std::vector<ComplexAffineMap> maps;
    for (const auto& m : j.at("affine_maps")) maps.push_back(map_of(m));
    Cvnn net(std::move(maps), activation_of(j.at("activation")));
    if (net.input_dim() != j.at("input_dim").get<std::size_t>() || net.output_dim() != j.at("output_dim").get<std::size_t>())
        throw DimensionError("declared network dimensions disagree with the affine maps");
    return net;
}

json form_json(const LinearForm& f) {
    json terms = json::array();
    for (const auto& [i, c] : f.terms) terms.push_back(json::array({i, cplx(c)}));
    return {{"terms", terms}, {"bias", cplx(f.bias)}};
}

LinearForm form_of(const json& j) {
    LinearForm f = LinearForm::constant(cplx_of(j.at("bias")));
    for (const auto& t : j.at("terms")) f.terms.emplace_back(t.at(0).get<std::size_t>(), cplx_of(t.at(1)));
    return f;
}

SlotOp op_of(const std::string& s) {
    for (SlotOp op : {SlotOp::Id, SlotOp::Conj, SlotOp::Raw, SlotOp::Mul})
        if (to_string(op) == s) return op;
    throw InvalidArgument(fmt::format("unknown slot op '{}'", s));
}

SlotRole role_of(const std::string& s) {
    for (SlotRole r : {SlotRole::InId, SlotRole::InConj, SlotRole::OutAccum, SlotRole::Compute, SlotRole::Flush,
                       SlotRole::ConstOne, SlotRole::Carry})
        if (to_string(r) == s) return r;
    throw InvalidArgument(fmt::format("unknown slot role '{}'", s));
}

ProgramShape shape_of(const std::string& s) {
    for (ProgramShape p : {ProgramShape::Shallow, ProgramShape::Poly, ProgramShape::Generic})
        if (to_string(p) == s) return p;
    throw InvalidArgument(fmt::format("unknown program shape '{}'", s));
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json box_json(const CompactBox& b) {
    json re = json::array(), im = json::array();
    for (const auto& i : b.re()) re.push_back(json::array({i.lo, i.hi}));
    for (const auto& i : b.im()) im.push_back(json::array({i.lo, i.hi}));
    return {{"re", re}, {"im", im}};
}

template <class F>
auto parse_with(const std::string& text, F&& f) {
    try {
        return f(json::parse(text));
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed JSON: {}", e.what()));
    }
}

json sweep_json(const SweepReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"h", row.h},
                        {"sup_error", finite_or_null(row.sup_error)},
                        {"max_coeff", finite_or_null(row.max_coeff)},
                        {"depth", row.depth},
                        {"width", row.width}});
    json meta = json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = v;
    return {{"metadata", meta}, {"rows", rows}};
}

}  // namespace

std::string network_to_json(const Cvnn& net) { return network_json(net).dump(); }

Cvnn network_from_json(const std::string& text) {
    return parse_with(text, [](const json& j) { return network_of(j); });
}

std::string block_to_json(const ShallowBlock& block) {
    json j = network_json(block.as_cvnn());
    j["kind"] = to_string(block.kind);
    j["z0"] = cplx(block.z0);
    j["h"] = block.h;
    if (!block.route.empty()) j["route"] = block.route;
    return j.dump();
}

std::pair<Cvnn, BlockKind> block_from_json(const std::string& text) {
    return parse_with(text, [](const json& j) {
        return std::pair<Cvnn, BlockKind>{network_of(j), block_kind_from_string(j.at("kind").get<std::string>())};
    });
}

std::string program_to_json(const RegisterProgram& prog) {
    json layers = json::array();
    for (const auto& l : prog.layers) {
        json slots = json::array();
        for (const auto& s : l.slots) {
            json args = json::array();
            for (const auto& f : s.args) args.push_back(form_json(f));
            json js = {{"role", to_string(s.role)}, {"op", to_string(s.op)}, {"args", args}};
            if (s.op == SlotOp::Mul) js["kind"] = to_string(s.kind);
            slots.push_back(std::move(js));
        }
        layers.push_back({{"slots", slots}});
    }
    return json{{"n", prog.n},
                {"m", prog.m},
                {"shape", to_string(prog.shape)},
                {"kind", to_string(prog.kind)},
                {"t_init", map_json(prog.t_init)},
                {"layers", layers},
                {"t_end", map_json(prog.t_end)}}
        .dump();
}

RegisterProgram program_from_json(const std::string& text) {
    return parse_with(text, [](const json& j) {
        RegisterProgram p;
        p.n = j.at("n").get<std::size_t>();
        p.m = j.at("m").get<std::size_t>();
        p.shape = shape_of(j.at("shape").get<std::string>());
        p.kind = mul_kind_from_string(j.at("kind").get<std::string>());
        p.t_init = map_of(j.at("t_init"));
        p.t_end = map_of(j.at("t_end"));
        for (const auto& jl : j.at("layers")) {
            Layer l;
            for (const auto& js : jl.at("slots")) {
                Slot s{role_of(js.at("role").get<std::string>()), op_of(js.at("op").get<std::string>())};
                if (js.contains("kind")) s.kind = mul_kind_from_string(js.at("kind").get<std::string>());
                for (const auto& f : js.at("args")) s.args.push_back(form_of(f));
                l.slots.push_back(std::move(s));
            }
            p.layers.push_back(std::move(l));
        }
        p.validate();
        return p;
    });
}

std::string classification_to_json(const Classification& c) {
    json probes = json::array();
    for (const auto& p : c.probes)
        probes.push_back({{"z0", cplx(p.z0)},
                          {"d", cplx(p.d)},
                          {"dbar", cplx(p.dbar)},
                          {"est_error", p.est_error},
                          {"taylor_pass", p.taylor_pass}});
    const auto& t = c.tolerances;
    json tol = {{"zero_tol", t.zero_tol},
                {"fd_step", t.fd_step},
                {"richardson_levels", t.richardson_levels},
                {"polyharmonic_max_order", t.polyharmonic_max_order},
                {"probe_box", box_json(t.probe_box)},
                {"probe_grid", t.probe_grid.points_per_axis},
                {"prefer_analytic", t.prefer_analytic}};
    if (!t.probe_points.empty()) {
        json pts = json::array();
        for (Cplx z : t.probe_points) pts.push_back(cplx(z));
        tol["probe_points"] = pts;
    }
    return json{{"verdict", to_string(c.verdict)},
                {"witness", c.witness ? cplx(*c.witness) : json(nullptr)},
                {"polyharmonic", c.polyharmonic},
                {"evidence", c.evidence},
                {"probes", probes},
                {"tolerances", tol}}
        .dump();
}

std::string polynomial_to_json(const std::vector<PolyZZbar>& comps) {
    json jc = json::array();
    std::size_t n = comps.empty() ? 0 : comps.front().n();
    for (const auto& p : comps) {
        json terms = json::array();
        for (const auto& t : p.terms()) {
            json exps = json::array();
            for (auto [a, b] : t.exps) exps.push_back(json::array({a, b}));
            terms.push_back({{"coeff", cplx(t.coeff)}, {"exps", exps}});
        }
        jc.push_back(terms);
    }
    return json{{"n", n}, {"components", jc}}.dump();
}

std::vector<PolyZZbar> polynomial_from_json(const std::string& text) {
    return parse_with(text, [](const json& j) {
        const std::size_t n = j.at("n").get<std::size_t>();
        std::vector<PolyZZbar> out;
        for (const auto& jc : j.at("components")) {
            std::vector<PolyTerm> terms;
            for (const auto& jt : jc) {
                PolyTerm t{cplx_of(jt.at("coeff")), {}};
                for (const auto& e : jt.at("exps")) t.exps.emplace_back(e.at(0).get<unsigned>(), e.at(1).get<unsigned>());
                terms.push_back(std::move(t));
            }
            out.emplace_back(n, std::move(terms));
        }
        if (out.empty()) throw InvalidArgument("polynomial has no components");
        return out;
    });
}

std::string sweep_to_json(const SweepReport& r) { return sweep_json(r).dump(); }

std::string end_to_end_to_json(const EndToEnd& r) {
    return json{{"h", r.h},
                {"stage_error", finite_or_null(r.stage_error)},
                {"total_error", finite_or_null(r.total_error)},
                {"width", r.net.width()},
                {"depth", r.net.depth()},
                {"program_width", r.program.width()},
                {"warnings", r.warnings},
                {"sweep", sweep_json(r.report)}}
        .dump();
}

std::string kernel_report_to_json(const KernelReport& r) {
    json j = {{"applicable", r.applicable}, {"threshold", r.threshold}};
    if (r.applicable) {
        j["kernel"] = r.kernel;
        j["residual"] = r.residual;
        j["l1"] = {{"value", r.l1.value}, {"std_error", r.l1.std_error}, {"samples", r.l1.samples}};
        j["invariance_ok"] = r.invariance_ok;
        j["bound_ok"] = r.bound_ok;
    }
    return j.dump();
}

std::string floor_report_to_json(const FloorReport& r) {
    json errs = json::array();
    for (double e : r.net_errors) errs.push_back(finite_or_null(e));
    return json{{"floor", r.floor}, {"net_errors", errs}, {"min_net_error", finite_or_null(r.min_net_error)}}.dump();
}

std::string closure_report_to_json(const ClosureReport& r) {
    json fits = json::array();
    for (const auto& f : r.fits)
        fits.push_back({{"activation", f.activation},
                        {"target", f.target},
                        {"width", f.width},
                        {"depth", f.depth},
                        {"seed", f.seed},
                        {"sup_error", finite_or_null(f.sup_error)}});
    return json{{"affine_residual", r.affine_residual},
                {"holo_floor", finite_or_null(r.holo_floor)},
                {"antiholo_floor", finite_or_null(r.antiholo_floor)},
                {"fits", fits}}
        .dump();
}

std::string nowhere_report_to_json(const NowhereReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells) cells.push_back({{"h", c.h}, {"k", c.k}, {"sup_error", finite_or_null(c.sup_error)}});
    json best = r.best ? json{{"h", r.best->h}, {"k", r.best->k}, {"sup_error", r.best->sup_error}} : json(nullptr);
    return json{{"best", best}, {"cells", cells}}.dump();
}

}  // namespace cvnn
