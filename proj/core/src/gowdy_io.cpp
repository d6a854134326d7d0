#include <bit>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "vacsing/gowdy.hpp"

namespace vacsing::gowdy {

namespace {

void write_block(std::ofstream& out, const std::vector<double>& data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
}

void read_block(std::ifstream& in, std::vector<double>& data) {
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("gowdy snapshot: truncated binary block");
}

}  // namespace

void save_snapshot(const GowdyState& state, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "snapshot format is little-endian");
  nlohmann::json header = {
      {"format", "gowdy-snapshot-v1"},
      {"N", state.dim},
      {"n_y", state.grid.size()},
      {"L_c", state.grid.length()},
      {"s", state.s},
      {"scheme", state.grid.scheme() == DerivScheme::Spectral ? "spectral" : "fd4"},
      {"tolerances", {{"det_rel", 1e-8}, {"trace_atilde", 1e-8}}},
      {"arrays", {"G", "Atilde"}},
      {"layout", "row-major (point, i, j)"},
      {"byte_order", "little"},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("gowdy snapshot: cannot open " + path + " for writing");
  out << header.dump() << "\n";
  write_block(out, state.g.raw());
  write_block(out, state.atilde.raw());
  if (!out) throw std::runtime_error("gowdy snapshot: write failed for " + path);
}

GowdyState load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("gowdy snapshot: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("gowdy snapshot: missing header line");
  nlohmann::json header = nlohmann::json::parse(header_line);
  if (header.value("format", "") != "gowdy-snapshot-v1")
    throw std::runtime_error("gowdy snapshot: unknown format");

  const int dim = header.at("N").get<int>();
  const int n = header.at("n_y").get<int>();
  const double length = header.at("L_c").get<double>();
  const double s = header.at("s").get<double>();
  const std::string scheme = header.at("scheme").get<std::string>();

  CircleGrid grid(n, length, scheme == "spectral" ? DerivScheme::Spectral : DerivScheme::FD4);
  GowdyState state{grid, dim, s, MatrixField(n, dim), MatrixField(n, dim),
                   DensityField::constant(grid, 2.0)};
  read_block(in, state.g.raw());
  read_block(in, state.atilde.raw());
  state.validate();
  return state;
}

}  // namespace vacsing::gowdy
