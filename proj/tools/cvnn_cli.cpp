#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cvnn/blocks.hpp"
#include "cvnn/fitting.hpp"
#include "cvnn/register.hpp"
#include "cvnn/serialize.hpp"
#include "cvnn/verifier.hpp"
#include "cvnn/wirtinger.hpp"

using namespace cvnn;
namespace fs = std::filesystem;

namespace {

// Every field has a default; a config file sets keys with the same names as the flags.
struct RunConfig {
    std::string activation;  // required except for demos, which have their own defaults
    std::vector<std::string> params;
    std::size_t n = 1;
    std::size_t m = 1;
    std::string strategy;  // empty: picked from the classifier verdict
    std::string h = "auto";
    std::string box = "-1,1;-1,1";
    std::size_t grid = 21;
    std::uint64_t seed = 0;
    std::string out;  // directory; stdout when empty
    bool no_timestamp = false;

    std::string target = "zbar_sq_plus_z";
    unsigned degree = 2;
    std::size_t features = 64;
    double ridge = 1e-10;
    std::string poly;     // polynomial JSON file
    std::string program;  // register program JSON file
    std::string net;      // network JSON file
    std::string point;    // "re,im;re,im"
    std::string block = "identity";
    std::string demo;
    std::size_t width = 3;
    std::size_t seeds = 5;
    int k_max = 50;
    std::size_t samples = 200000;
};

std::vector<double> parse_numbers(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidArgument(fmt::format("cannot parse number '{}'", tok));
        }
    }
    return out;
}

ParamMap parse_params(const std::vector<std::string>& kvs) {
    ParamMap p;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidArgument(fmt::format("--param expects k=v, got '{}'", kv));
        p[kv.substr(0, eq)] = parse_numbers(kv.substr(eq + 1), ',').at(0);
    }
    return p;
}

// "a,b;c,d" is re;im for every coordinate, or 2n such pairs for one box per coordinate.
CompactBox parse_box(const std::string& s, std::size_t n) {
    std::vector<Interval> pairs;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) {
        const auto v = parse_numbers(part, ',');
        if (v.size() != 2 || !(v[0] < v[1])) throw InvalidArgument(fmt::format("bad box interval '{}'", part));
        pairs.push_back({v[0], v[1]});
    }
    std::vector<Interval> re, im;
    if (pairs.size() == 2) {
        re.assign(n, pairs[0]);
        im.assign(n, pairs[1]);
    } else if (pairs.size() == 2 * n) {
        for (std::size_t i = 0; i < n; ++i) {
            re.push_back(pairs[2 * i]);
            im.push_back(pairs[2 * i + 1]);
        }
    } else {
        throw InvalidArgument(fmt::format("box needs 2 or {} intervals, got {}", 2 * n, pairs.size()));
    }
    return CompactBox(std::move(re), std::move(im));
}

CVec parse_point(const std::string& s) {
    CVec z;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) {
        const auto v = parse_numbers(part, ',');
        if (v.size() != 2) throw InvalidArgument(fmt::format("point coordinates are re,im pairs, got '{}'", part));
        z.emplace_back(v[0], v[1]);
    }
    if (z.empty()) throw InvalidArgument("--point is required");
    return z;
}

// Output j applies the scalar map to coordinate j mod n.
VecFn named_target(const std::string& name, std::size_t n, std::size_t m) {
    std::function<Cplx(Cplx)> g;
    if (name == "id") g = [](Cplx z) { return z; };
    else if (name == "conj") g = [](Cplx z) { return std::conj(z); };
    else if (name == "abs_square") g = [](Cplx z) { return Cplx(std::norm(z)); };
    else if (name == "abs") g = [](Cplx z) { return Cplx(std::abs(z)); };
    else if (name == "zbar_sq_plus_z") g = [](Cplx z) { return std::conj(z) * std::conj(z) + z; };
    else if (name == "exp") g = [](Cplx z) { return std::exp(z); };
    else if (name == "sin") g = [](Cplx z) { return std::sin(z); };
    else
        throw InvalidArgument(
            fmt::format("unknown target '{}' (id, conj, abs_square, abs, zbar_sq_plus_z, exp, sin)", name));
    return [g, n, m](std::span<const Cplx> z) {
        if (z.size() != n) throw DimensionError(fmt::format("target expects {} inputs, got {}", n, z.size()));
        CVec out(m);
        for (std::size_t j = 0; j < m; ++j) out[j] = g(z[j % n]);
        return out;
    };
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot read '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Emitter {
public:
    explicit Emitter(const RunConfig& cfg) : cfg_(cfg) {
        if (!cfg.no_timestamp) {
            const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
            stamp_ = fmt::format("# generated {}", buf);
            std::cout << stamp_ << '\n';
        }
        if (!cfg.out.empty()) fs::create_directories(cfg.out);
    }

    void json(const std::string& file, const std::string& body) {
        if (cfg_.out.empty()) {
            std::cout << body << '\n';
            return;
        }
        write(file, body + "\n");
        std::cout << "wrote " << (fs::path(cfg_.out) / file).string() << '\n';
    }

    void csv(const std::string& file, const SweepReport& rep) {
        std::string body;
        if (!stamp_.empty()) body += stamp_ + '\n';
        for (const auto& [k, v] : rep.metadata) body += fmt::format("# {}={}\n", k, v);
        body += sweep_csv(rep);
        if (cfg_.out.empty()) {
            std::cout << body;
            return;
        }
        write(file, body);
        std::cout << "wrote " << (fs::path(cfg_.out) / file).string() << '\n';
    }

    void line(const std::string& s) { std::cout << s << '\n'; }

private:
    void write(const std::string& file, const std::string& body) {
        const fs::path p = fs::path(cfg_.out) / file;
        std::ofstream o(p, std::ios::binary);
        o << body;
        if (!o) throw EvaluationError(fmt::format("cannot write '{}'", p.string()));
    }

    const RunConfig& cfg_;
    std::string stamp_;
};

Activation activation_of(const RunConfig& c, const char* fallback = nullptr) {
    if (c.activation.empty() && !fallback) throw InvalidArgument("--activation is required");
    return get_activation(c.activation.empty() ? fallback : c.activation, parse_params(c.params));
}

EndToEndOptions end_to_end_options(const RunConfig& c) {
    EndToEndOptions opt;
    opt.box = parse_box(c.box, c.n);
    opt.fit_grid = GridSpec(c.grid);
    if (c.h != "auto") opt.hs = {parse_numbers(c.h, ',').at(0)};
    return opt;
}

// Strategy from the flag, else from the verdict; non-universal activations are refused.
LoweringStrategy pick_strategy(const RunConfig& c, const Activation& act) {
    const Classification cls = classify_activation(act, c.n, c.m);
    if (!is_universal(cls.verdict))
        throw IncompatibleError(fmt::format("activation '{}' is {}: networks of it are not universal approximators",
                                            act.name(), to_string(cls.verdict)));
    return c.strategy.empty() ? strategy_for(cls.verdict, act) : strategy_from_string(c.strategy);
}

void report_net(Emitter& out, const Cvnn& net, const std::string& what) {
    out.line(fmt::format("{}: width {} depth {} max_coeff {:.6g}", what, net.width(), net.depth(), net.max_abs_coeff()));
}

void cmd_classify(const RunConfig& c) {
    Emitter out(c);
    out.json("classification.json", classification_to_json(classify_activation(activation_of(c), c.n, c.m)));
}

void cmd_fit_shallow(const RunConfig& c) {
    Emitter out(c);
    FitConfig fc;
    fc.num_features = c.features;
    fc.ridge = c.ridge;
    fc.box = parse_box(c.box, c.n);
    fc.grid = GridSpec(c.grid);
    fc.seed = c.seed;
    const FitResult r = fit_shallow(named_target(c.target, c.n, c.m), activation_of(c), c.n, c.m, fc);
    for (const auto& w : r.warnings) out.line("warning: " + w);
    out.line(fmt::format("sup_error {:.17g}", r.sup_error));
    out.json("network.json", network_to_json(r.net));
}

void cmd_fit_poly(const RunConfig& c) {
    Emitter out(c);
    const PolyFit r = fit_poly(named_target(c.target, c.n, c.m), c.n, c.m, c.degree, parse_box(c.box, c.n),
                               GridSpec(c.grid));
    out.line(fmt::format("sup_error {:.17g}", r.sup_error));
    out.json("polynomial.json", polynomial_to_json(r.components));
}

void cmd_compile(const RunConfig& c) {
    const Activation act = activation_of(c);
    const LoweringStrategy s = pick_strategy(c, act);
    EndToEndOptions opt = end_to_end_options(c);
    opt.skip_classification = c.strategy.empty();
    Emitter out(c);
    EndToEnd r = [&] {
        if (!c.poly.empty()) {
            if (!is_poly_strategy(s))
                throw IncompatibleError(fmt::format("{} cannot lower a polynomial program", to_string(s)));
            return end_to_end_components(polynomial_from_json(read_file(c.poly)), act, s, opt);
        }
        const VecFn f = named_target(c.target, c.n, c.m);
        if (is_poly_strategy(s)) return end_to_end_poly(f, act, c.n, c.m, c.degree, s, opt);
        FitConfig fc;
        fc.num_features = c.features;
        fc.ridge = c.ridge;
        fc.seed = c.seed;
        return end_to_end_nonpoly(f, act, c.n, c.m, fc, s, opt);
    }();
    for (const auto& w : r.warnings) out.line("warning: " + w);
    out.line(fmt::format("strategy {} h {:.17g} stage_error {:.6g} total_error {:.6g}", to_string(s), r.h,
                         r.stage_error, r.total_error));
    report_net(out, r.net, "network");
    out.json("network.json", network_to_json(r.net));
    out.json("program.json", program_to_json(r.program));
    out.csv("sweep.csv", r.report);
}

void cmd_lower(const RunConfig& c) {
    if (c.program.empty()) throw InvalidArgument("--program is required");
    if (c.h == "auto") throw InvalidArgument("lower needs an explicit --h");
    const Activation act = activation_of(c);
    const RegisterProgram prog = program_from_json(read_file(c.program));
    RunConfig cc = c;
    cc.n = prog.n;
    cc.m = prog.m;
    const LoweringStrategy s = pick_strategy(cc, act);
    Emitter out(c);
    const Lowered low = lower_detailed(prog, act, s, parse_numbers(c.h, ',').at(0));
    for (const auto& w : low.warnings) out.line("warning: " + w);
    report_net(out, low.net, "network");
    out.json("network.json", network_to_json(low.net));
}

ShallowBlock build_block(const std::string& kind, const Activation& act, const BlockSites& sites, double h) {
    auto need = [&](const std::optional<Cplx>& p) {
        if (!p) throw IncompatibleError(fmt::format("activation '{}' admits no {} block", act.name(), kind));
        return *p;
    };
    if (kind == "identity") return identity_block(act, need(sites.identity), h);
    if (kind == "conj") return conj_block(act, need(sites.conj), h);
    if (kind == "pair") return pair_block(act, need(sites.pair), h);
    if (kind == "id_conj") return id_conj_pair_block(act, sites.pair, sites.identity, sites.conj, h);
    if (kind == "square" || kind == "mul") {
        if (!sites.second) throw IncompatibleError(fmt::format("activation '{}' admits no {} block", act.name(), kind));
        return kind == "square" ? square_block(act, sites.second->z0, h).block : mul_block(act, sites.second->z0, h).block;
    }
    throw InvalidArgument(fmt::format("unknown block '{}' (identity, conj, pair, id_conj, square, mul)", kind));
}

void cmd_sweep(const RunConfig& c) {
    const Activation act = activation_of(c);
    const BlockSites sites = find_block_sites(act);
    const std::vector<double> hs = c.h == "auto" ? default_h_schedule() : parse_numbers(c.h, ',');
    // Probe once to learn the kind, which fixes the target map.
    const ShallowBlock probe = build_block(c.block, act, sites, hs.front());
    const std::size_t dim = probe.in_dim();
    Emitter out(c);
    SweepReport rep = h_sweep([&](double h) { return build_block(c.block, act, sites, h).as_cvnn(); },
                              block_target(probe.kind), hs, parse_box(c.box, dim), GridSpec(c.grid));
    rep.metadata["activation"] = act.name();
    rep.metadata["block"] = to_string(probe.kind);
    out.csv("sweep.csv", rep);
}

void cmd_demo(const RunConfig& c) {
    Emitter out(c);
    if (c.demo == "lower-bound") {
        const Activation act = activation_of(c, "tanh_re");
        const std::size_t n = c.n < 2 ? 2 : c.n;
        const KernelReport r = kernel_invariance_demo(act, n, c.width, c.seed, c.samples);
        if (r.applicable)
            out.line(fmt::format("residual {:.3e} l1 {:.6g} +- {:.3g} threshold {:.6g}", r.residual, r.l1.value,
                                 r.l1.std_error, r.threshold));
        else
            out.line("first layer has trivial real kernel; demo not applicable");
        out.json("lower_bound.json", kernel_report_to_json(r));
    } else if (c.demo == "hyperplane-floor") {
        const FloorReport r = affine_subspace_floor_demo(c.seeds);
        out.line(fmt::format("floor {:.6g} min_net_error {:.6g}", r.floor, r.min_net_error));
        out.json("hyperplane_floor.json", floor_report_to_json(r));
    } else if (c.demo == "holo-floor" || c.demo == "affine-closure") {
        const ClosureReport r = closure_demos(c.seeds);
        out.line(fmt::format("affine_residual {:.3e} holo_floor {:.6g} antiholo_floor {:.6g}", r.affine_residual,
                             r.holo_floor, r.antiholo_floor));
        out.json(c.demo == "holo-floor" ? "holo_floor.json" : "affine_closure.json", closure_report_to_json(r));
    } else if (c.demo == "nowhere-diff") {
        const Activation act = activation_of(c, "nowhere_diff");
        const NowhereReport r = nowhere_diff_demo(act, default_h_schedule(), c.k_max, GridSpec(c.grid));
        if (r.best) out.line(fmt::format("best h {:.6g} k {} sup_error {:.6g}", r.best->h, r.best->k, r.best->sup_error));
        out.json("nowhere_diff.json", nowhere_report_to_json(r));
    } else {
        throw InvalidArgument(fmt::format(
            "unknown demo '{}' (lower-bound, hyperplane-floor, holo-floor, affine-closure, nowhere-diff)", c.demo));
    }
}

void cmd_eval(const RunConfig& c) {
    if (c.net.empty()) throw InvalidArgument("--net is required");
    const Cvnn net = network_from_json(read_file(c.net));
    const CVec z = parse_point(c.point);
    if (z.size() != net.input_dim())
        throw DimensionError(fmt::format("network expects {} inputs, got {}", net.input_dim(), z.size()));
    Emitter out(c);
    for (Cplx v : net(z)) out.line(fmt::format("{:.17g},{:.17g}", v.real(), v.imag()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Complex-valued network construction and verification"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value file; flags take precedence");
    RunConfig c;
    app.add_option("--activation", c.activation, "activation name");
    app.add_option("--param", c.params, "activation parameter k=v, repeatable");
    app.add_option("--n", c.n, "input dimension")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--m", c.m, "output dimension")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--strategy", c.strategy, "lowering strategy (default: from the verdict)");
    app.add_option("--h", c.h, "step size, comma-separated schedule for sweep, or auto")->capture_default_str();
    app.add_option("--box", c.box, "re,im intervals \"a,b;c,d\"")->capture_default_str();
    app.add_option("--grid", c.grid, "points per axis")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--out", c.out, "output directory (default: stdout)");
    app.add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp header line");
    app.add_option("--target", c.target, "target map for fitting")->capture_default_str();
    app.add_option("--degree", c.degree, "polynomial degree")->capture_default_str();
    app.add_option("--features", c.features, "random features")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--ridge", c.ridge, "ridge parameter")->capture_default_str();
    app.add_option("--poly", c.poly, "polynomial JSON file");
    app.add_option("--program", c.program, "register program JSON file");
    app.add_option("--net", c.net, "network JSON file");
    app.add_option("--point", c.point, "evaluation point \"re,im;re,im\"");
    app.add_option("--block", c.block, "block for sweep")->capture_default_str();
    app.add_option("--width", c.width, "hidden width for lower-bound")->capture_default_str();
    app.add_option("--seeds", c.seeds, "seeds per campaign cell")->capture_default_str();
    app.add_option("--k-max", c.k_max, "largest shift for nowhere-diff")->capture_default_str();
    app.add_option("--samples", c.samples, "Monte Carlo samples")->capture_default_str();

    app.fallthrough();
    std::function<void()> run;
    auto sub = [&](const char* name, const char* help, void (*fn)(const RunConfig&)) {
        auto* s = app.add_subcommand(name, help);
        s->callback([&run, fn, &c] { run = [fn, &c] { fn(c); }; });
        return s;
    };
    sub("classify", "classify an activation", cmd_classify);
    sub("fit-shallow", "random-feature shallow fit of a target", cmd_fit_shallow);
    sub("fit-poly", "least-squares polynomial fit of a target", cmd_fit_poly);
    sub("compile", "fit, compile and lower to a network", cmd_compile);
    sub("lower", "lower a register program", cmd_lower);
    sub("sweep", "h sweep of a building block", cmd_sweep);
    sub("demo", "run a verifier demo", cmd_demo)->add_option("name", c.demo, "demo name")->required();
    sub("eval", "evaluate a network", cmd_eval);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: INVALID_ARGUMENT: " << e.what() << '\n';
        return 2;
    }
    try {
        run();
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: INTERNAL: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
