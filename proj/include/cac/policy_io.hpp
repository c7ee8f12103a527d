#pragma once

#include "cac/solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace cac {

/// Policy table file.
///
///   cac-policy v1 K=<k> N=<n> b=<b1;..;bK> R=<r10,r11,r12;..> c=<c1;..;cK> pricing=<flat|linear>
///   x1,..,xK,<event code>,<accept|reject>      one row per state, canonical order
///
/// Reals are written in shortest round-trip form, so read(write(p)) == p
/// exactly and write(read(f)) reproduces f byte for byte.
void write_policy(std::ostream& out, const Policy& policy);
void write_policy(const std::filesystem::path& path, const Policy& policy);

/// Throws std::runtime_error with the offending line number on malformed input.
Policy read_policy(std::istream& in);
Policy read_policy(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_real(double v);
double parse_real(std::string_view text);

}  // namespace cac
