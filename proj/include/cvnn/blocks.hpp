#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvnn/core.hpp"
#include "cvnn/wirtinger.hpp"

namespace cvnn {

enum class BlockKind { Identity, Conjugation, PairIdConj, SquareZZbar, SquareZ2, SquareZbar2, Mul1, Mul2, Mul3, IdConjPair };
enum class MulKind { Mul1, Mul2, Mul3 };

std::string to_string(BlockKind k);
std::string to_string(MulKind k);
BlockKind block_kind_from_string(const std::string& s);
MulKind mul_kind_from_string(const std::string& s);

// Mul1: a*b, Mul2: a*conj(b), Mul3: conj(a*b).
Cplx apply_mul(MulKind kind, Cplx a, Cplx b);
MulKind mul_kind_for(SecondWhich which);

// psi o act o phi with phi = pre and psi = post.
struct ShallowBlock {
    ComplexAffineMap pre;
    ComplexAffineMap post;
    BlockKind kind;
    Cplx z0;
    double h;
    Activation act;
    double coeff_scale = 0.0;  // predicted max |post coefficient|
    std::string route;         // how an IdConjPair block was realized
    std::vector<std::string> warnings;

    std::size_t width() const { return pre.rows(); }
    std::size_t in_dim() const { return pre.cols(); }
    std::size_t out_dim() const { return post.rows(); }
    CVec operator()(std::span<const Cplx> z) const;
    Cvnn as_cvnn() const;
};

ShallowBlock identity_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof = {});
ShallowBlock conj_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof = {});
ShallowBlock pair_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof = {});

// Two neurons approximating z -> (z, conj z): one point with both derivatives
// nonzero if available, else an identity point plus a conjugation point.
// Warns when the leftover derivative at either point exceeds target_tol.
ShallowBlock id_conj_pair_block(const Activation& act, const ToleranceProfile& prof, double h,
                                double target_tol = 1e-2);
// Same with the points already chosen.
ShallowBlock id_conj_pair_block(const Activation& act, std::optional<Cplx> pair, std::optional<Cplx> id,
                                std::optional<Cplx> conj, double h, const ToleranceProfile& prof = {},
                                double target_tol = 1e-2);

struct SquareResult {
    ShallowBlock block;
    SecondWhich which;
};

SquareResult square_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof = {});

struct MulResult {
    ShallowBlock block;
    MulKind kind;
};

MulResult mul_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof = {});

using VecFn = std::function<CVec(std::span<const Cplx>)>;

// The map a block of the given kind approximates.
VecFn block_target(BlockKind kind);

double block_error(const ShallowBlock& block, const VecFn& target, const CompactBox& box, const GridSpec& grid);

// 0.1 * 2^-k for k = 0.. while h >= 1e-6.
std::vector<double> default_h_schedule();

struct TunedH {
    double h;
    double error;
    std::vector<double> errors;  // one per evaluated schedule entry
};

// Walks the schedule until the error increases and returns the argmin.
TunedH tune_h(const std::function<double(double)>& error_at, const std::vector<double>& schedule);

}  // namespace cvnn
