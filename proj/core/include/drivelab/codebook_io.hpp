#pragma once

#include <iosfwd>
#include <string>

#include "drivelab/tokenizer.hpp"

namespace drivelab {

// `kdisc v1 K=<K>` header followed by K blocks of 5 `x y yaw` lines, written
// at 17 significant digits so reading back is bit-exact.
void write_codebook(std::ostream& out, const Codebook& codebook);
Codebook read_codebook(std::istream& in);

void save_codebook(const std::string& path, const Codebook& codebook);
Codebook load_codebook(const std::string& path);

}  // namespace drivelab
