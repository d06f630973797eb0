#ifndef AFFORD_TOOLS_CLI_HPP_
#define AFFORD_TOOLS_CLI_HPP_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "afford/core/types.hpp"

namespace afford::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand; `args` excludes the program name. Usage errors go to
// `err` with the usage text, runtime errors as one line of JSON.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Image dimmed to 35% plus three probability channels added to R, G and B,
// clamped to [0,1].
RgbRaster render_overlay(const RgbRaster& image, const AffordanceTensor& prediction,
                         const std::array<std::size_t, 3>& channels);

}  // namespace afford::cli

#endif  // AFFORD_TOOLS_CLI_HPP_
