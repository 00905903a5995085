#include "drivelab/codebook_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "drivelab/error.hpp"

namespace drivelab {

void write_codebook(std::ostream& out, const Codebook& codebook) {
  out << "kdisc v1 K=" << codebook.size() << '\n' << std::setprecision(17);
  for (const Segment& proto : codebook.prototypes()) {
    for (const Waypoint& wp : proto) out << wp.x << ' ' << wp.y << ' ' << wp.yaw << '\n';
  }
}

Codebook read_codebook(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("codebook: missing header");
  std::istringstream head(header);
  std::string magic, version, count_field;
  head >> magic >> version >> count_field;
  if (magic != "kdisc" || version != "v1" || count_field.rfind("K=", 0) != 0) {
    throw ParseError("codebook: expected `kdisc v1 K=<K>` header, got `" + header + "`");
  }
  std::size_t k = 0;
  try {
    k = std::stoul(count_field.substr(2));
  } catch (const std::exception&) {
    throw ParseError("codebook: bad K in header `" + header + "`");
  }
  if (k == 0 || k > kMaxVocabulary) throw ParseError("codebook: K out of range");

  std::vector<Segment> prototypes(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < kSegmentLength; ++j) {
      Waypoint& wp = prototypes[i][j];
      if (!(in >> wp.x >> wp.y >> wp.yaw)) {
        throw ParseError("codebook: truncated at prototype " + std::to_string(i));
      }
    }
  }
  std::string trailing;
  if (in >> trailing) throw ParseError("codebook: unexpected trailing data");
  return Codebook(std::move(prototypes));
}

void save_codebook(const std::string& path, const Codebook& codebook) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write codebook " + path);
  write_codebook(out, codebook);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open codebook " + path);
  return read_codebook(in);
}

}  // namespace drivelab
