#pragma once

#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "edqed/config_io.hpp"
#include "edqed/geometry.hpp"
#include "edqed/kernel.hpp"

namespace edqed {

enum class StateLayout { split, interleaved };

/// {"spec_hash", "layout", "rho"/"phi" or "psi" = [re, im, re, im, ...]}.
inline json state_to_json(const LatticeSpec& spec, const ComplexVec& psi, StateLayout layout = StateLayout::split) {
  json j;
  j["spec_hash"] = hex64(spec_hash(spec));
  if (layout == StateLayout::split) {
    const EpistemicState st = from_wavefunction(psi, spec.hbar);
    j["layout"] = "split";
    j["rho"] = std::vector<double>(st.rho.data(), st.rho.data() + st.rho.size());
    j["phi"] = std::vector<double>(st.phi.data(), st.phi.data() + st.phi.size());
  } else {
    j["layout"] = "interleaved";
    std::vector<double> v;
    v.reserve(2 * psi.size());
    for (const auto& z : psi) {
      v.push_back(z.real());
      v.push_back(z.imag());
    }
    j["psi"] = v;
  }
  return j;
}

inline ComplexVec state_from_json(const LatticeSpec& spec, const json& j) {
  if (!j.is_object() || !j.contains("spec_hash") || !j.contains("layout")) throw ParseError("malformed state", "/");
  if (j["spec_hash"] != hex64(spec_hash(spec)))
    throw ParseError("state was written for a different lattice spec", "/spec_hash");
  const std::string layout = j["layout"].get<std::string>();
  try {
    if (layout == "split") {
      const auto rho = j.at("rho").get<std::vector<double>>();
      const auto phi = j.at("phi").get<std::vector<double>>();
      if (rho.size() != phi.size()) throw ParseError("rho and phi lengths differ", "/phi");
      return to_wavefunction(Eigen::Map<const RealVec>(rho.data(), rho.size()),
                             Eigen::Map<const RealVec>(phi.data(), phi.size()), spec.hbar);
    }
    if (layout == "interleaved") {
      const auto v = j.at("psi").get<std::vector<double>>();
      if (v.size() % 2) throw ParseError("interleaved state has odd length", "/psi");
      ComplexVec psi(v.size() / 2);
      for (std::size_t k = 0; k < v.size() / 2; ++k) psi[k] = cplx(v[2 * k], v[2 * k + 1]);
      return psi;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed state: ") + e.what(), "/");
  }
  throw ParseError("unknown state layout '" + layout + "'", "/layout");
}

inline const char* basis_name(Basis b) { return b == Basis::configuration ? "configuration" : "electric"; }

inline const char* tag_name(KernelTag t) {
  switch (t) {
    case KernelTag::hamiltonian: return "hamiltonian";
    case KernelTag::constraint: return "constraint";
    default: return "observable";
  }
}

/// Coordinate-format text: a comment header, then "row col re im" per stored entry.
inline void write_coo(std::ostream& os, const KernelOperator& op) {
  os << "% edqed kernel basis=" << basis_name(op.basis) << " tag=" << tag_name(op.tag) << '\n';
  os << op.mat.rows() << ' ' << op.mat.cols() << ' ' << op.mat.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int k = 0; k < op.mat.outerSize(); ++k)
    for (SpMat::InnerIterator it(op.mat, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

/// Plain CSV table writer with full double precision.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& columns) : os_(os), ncol_(columns.size()) {
    for (std::size_t c = 0; c < columns.size(); ++c) os_ << (c ? "," : "") << columns[c];
    os_ << '\n' << std::setprecision(17);
  }

  void row(const std::vector<double>& v) {
    if (v.size() != ncol_) throw IndexError("CSV row has wrong number of columns");
    for (std::size_t c = 0; c < v.size(); ++c) os_ << (c ? "," : "") << v[c];
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t ncol_;
};

}  // namespace edqed
