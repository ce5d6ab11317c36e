#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvnn/fitting.hpp"
#include "cvnn/register.hpp"
#include "cvnn/wirtinger.hpp"

namespace cvnn {

VecFn as_fn(const Cvnn& net);

double sup_error(const VecFn& f, const VecFn& g, const CompactBox& box, const GridSpec& grid);

struct McEstimate {
    double value;
    double std_error;
    std::size_t samples;
};

// Monte Carlo estimate of the integral of |f - g| over the box.
McEstimate l1_error_mc(const VecFn& f, const VecFn& g, const CompactBox& box, std::size_t samples, std::uint64_t seed);

struct SweepRow {
    double h;
    double sup_error;  // +inf when the network could not be built or evaluated
    double max_coeff;
    std::size_t depth;
    std::size_t width;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::map<std::string, std::string> metadata;

    // Index of the smallest finite error.
    std::size_t best() const;
};

std::string sweep_csv(const SweepReport& r);

// One independently built network per h; hs must be strictly decreasing.
SweepReport h_sweep(const std::function<Cvnn(double)>& build, const VecFn& target, const std::vector<double>& hs,
                    const CompactBox& box, const GridSpec& grid);

struct EndToEndOptions {
    CompactBox box = CompactBox::square(1, -1.0, 1.0);
    GridSpec fit_grid{21};
    std::vector<double> hs = default_h_schedule();
    ToleranceProfile prof;
    // Skip the classifier gate (the caller vouches for the strategy).
    bool skip_classification = false;
};

struct EndToEnd {
    Cvnn net;                 // best network of the sweep
    double h;
    SweepReport report;
    double stage_error;       // polynomial or shallow fit, on the verification grid
    double total_error;       // lowered network vs the target, same grid
    RegisterProgram program;
    std::vector<std::string> warnings;
};

EndToEnd end_to_end_poly(const VecFn& f, const Activation& act, std::size_t n, std::size_t m, unsigned degree,
                         LoweringStrategy s, const EndToEndOptions& opt = {});

EndToEnd end_to_end_nonpoly(const VecFn& f, const Activation& act, std::size_t n, std::size_t m, const FitConfig& cfg,
                            LoweringStrategy s, const EndToEndOptions& opt = {});

// Lowers a given polynomial map; its stage error is zero.
EndToEnd end_to_end_components(const std::vector<PolyZZbar>& components, const Activation& act, LoweringStrategy s,
                               const EndToEndOptions& opt = {});

struct KernelReport {
    bool applicable;          // false when the real kernel of the first layer is trivial
    std::vector<double> kernel;
    double residual;          // max |g(z+v) - g(z)| over random z
    McEstimate l1;
    double threshold;         // 0.8 times the volume of the radius-0.1 ball
    bool invariance_ok;
    bool bound_ok;
};

// Fits a network of width `width` (two hidden layers) against (|z|, 0, ...),
// then checks invariance along the real kernel of the first layer.
KernelReport kernel_invariance_demo(const Activation& act, std::size_t n, std::size_t width, std::uint64_t seed = 0,
                                    std::size_t mc_samples = 200000);
// Same on a given network.
KernelReport kernel_invariance_check(const Cvnn& net, std::uint64_t seed = 0, std::size_t mc_samples = 200000);

// min over lines of max distance to the points, brute force over angle x offset.
double hyperplane_floor(const std::vector<std::pair<double, double>>& points, std::size_t angles = 1800,
                        std::size_t offsets = 4001);

// Path 0 -> 1 -> 1+i -> i driven by the real part of the input on [-1,1].
Cplx square_edge_path(Cplx z);

struct FloorReport {
    double floor;
    std::vector<double> net_errors;
    double min_net_error;
};

FloorReport affine_subspace_floor_demo(std::size_t seeds = 3);

struct FitRow {
    std::string activation;
    std::string target;
    std::size_t width;
    std::size_t depth;
    std::uint64_t seed;
    double sup_error;  // +inf when the fit failed numerically
};

struct ClosureReport {
    double affine_residual;
    std::vector<FitRow> fits;
    double holo_floor;      // min error of holomorphic fits against conj z
    double antiholo_floor;  // min error of antiholomorphic fits against z
};

ClosureReport closure_demos(std::size_t seeds = 5);

// Max deviation from real-affinity over random probes.
double affine_residual(const Cvnn& net, std::uint64_t seed = 0, std::size_t probes = 200);

struct NowhereCell {
    double h;
    int k;
    double sup_error;
};

struct NowhereReport {
    std::vector<NowhereCell> cells;
    std::optional<NowhereCell> best;
};

// Block z -> act(h z + 2 pi k) / h against the identity on [-1,1]^2.
ShallowBlock shifted_identity_block(const Activation& act, double h, int k);
NowhereReport nowhere_diff_demo(const Activation& act, const std::vector<double>& hs, int k_max = 50,
                                const GridSpec& grid = GridSpec{21});

}  // namespace cvnn
