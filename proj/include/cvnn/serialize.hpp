#pragma once

#include <string>
#include <vector>

#include "cvnn/blocks.hpp"
#include "cvnn/core.hpp"
#include "cvnn/register.hpp"
#include "cvnn/verifier.hpp"
#include "cvnn/wirtinger.hpp"

namespace cvnn {

// Doubles are written in shortest round-trip form, so parse(dump(x)) == x bit for bit.
std::string network_to_json(const Cvnn& net);
Cvnn network_from_json(const std::string& text);

std::string block_to_json(const ShallowBlock& block);
// The block's network and its kind annotation.
std::pair<Cvnn, BlockKind> block_from_json(const std::string& text);

std::string program_to_json(const RegisterProgram& prog);
RegisterProgram program_from_json(const std::string& text);

std::string classification_to_json(const Classification& c);

std::string polynomial_to_json(const std::vector<PolyZZbar>& comps);
std::vector<PolyZZbar> polynomial_from_json(const std::string& text);

std::string sweep_to_json(const SweepReport& r);
std::string end_to_end_to_json(const EndToEnd& r);
std::string kernel_report_to_json(const KernelReport& r);
std::string floor_report_to_json(const FloorReport& r);
std::string closure_report_to_json(const ClosureReport& r);
std::string nowhere_report_to_json(const NowhereReport& r);

}  // namespace cvnn
