#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eqcl/nn.hpp"

namespace eqcl {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// args[0] is the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Branch subsets evaluated by `ablate`: the four singles, {fft, emd},
// {ap, fft, emd} and all four, restricted to subsets of `enabled`.
std::vector<std::vector<Branch>> ablation_subsets(const std::vector<Branch>& enabled);

}  // namespace eqcl
