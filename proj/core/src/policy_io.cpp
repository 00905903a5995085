#include "drivelab/policy_io.hpp"

#include <fstream>
#include <iomanip>

#include "drivelab/error.hpp"

namespace drivelab {
namespace {

void write_block(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

void read_block(std::istream& in, const char* name, Eigen::MatrixXd& m) {
  std::string header;
  if (!(in >> header) || header != name) {
    throw ParseError(std::string("policy checkpoint: expected block `") + name + "`");
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!(in >> m(r, c))) throw ParseError(std::string("policy checkpoint: truncated `") + name + "`");
    }
  }
}

}  // namespace

void write_policy(std::ostream& out, const PolicyParams& p) {
  out << "policy v1\n"
      << "dims " << p.vocab() << ' ' << p.hidden() << ' ' << p.feature_dim() << '\n'
      << std::setprecision(17);
  write_block(out, "token_embeddings", p.token_embeddings);
  write_block(out, "feature_weights", p.feature_weights);
  write_block(out, "step_weights", p.step_weights);
  write_block(out, "output_bias", p.output_bias.transpose());
}

PolicyParams read_policy(std::istream& in) {
  std::string magic, version, dims;
  Eigen::Index v = 0, d = 0, f = 0;
  if (!(in >> magic >> version) || magic != "policy" || version != "v1") {
    throw ParseError("policy checkpoint: expected `policy v1` header");
  }
  if (!(in >> dims >> v >> d >> f) || dims != "dims" || v <= 0 || d <= 0 || f <= 0) {
    throw ParseError("policy checkpoint: bad dims line");
  }
  PolicyParams p = PolicyParams::zeros(v, d, f);
  read_block(in, "token_embeddings", p.token_embeddings);
  read_block(in, "feature_weights", p.feature_weights);
  read_block(in, "step_weights", p.step_weights);
  Eigen::MatrixXd bias(1, v);
  read_block(in, "output_bias", bias);
  p.output_bias = bias.transpose();
  if (!p.all_finite()) throw ParseError("policy checkpoint: non-finite parameter");
  return p;
}

void save_policy(const std::string& path, const PolicyParams& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write policy checkpoint " + path);
  write_policy(out, p);
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open policy checkpoint " + path);
  return read_policy(in);
}

}  // namespace drivelab
