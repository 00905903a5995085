#pragma once

#include <iosfwd>
#include <string>

#include "drivelab/policy.hpp"

namespace drivelab {

// Text checkpoint: `policy v1`, a `dims V D F` line, then each parameter
// block as a named header followed by row-major values at 17 significant
// digits. Reading back is bit-exact.
void write_policy(std::ostream& out, const PolicyParams& p);
PolicyParams read_policy(std::istream& in);

void save_policy(const std::string& path, const PolicyParams& p);
PolicyParams load_policy(const std::string& path);

}  // namespace drivelab
