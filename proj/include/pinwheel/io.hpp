#pragma once
// Serialisation: binary field dumps, CSV tables, JSON reports, PGM images
// and run manifests.

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pinwheel/config.hpp"
#include "pinwheel/functional.hpp"
#include "pinwheel/grid.hpp"
#include "pinwheel/partition.hpp"
#include "pinwheel/scalar.hpp"
#include "pinwheel/solver.hpp"

namespace pinwheel {

using json = nlohmann::ordered_json;

class IoError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------- field dump

struct FieldHeader {
  std::size_t nr = 0, m = 0, ns = 1;
  double r_max = 0.0, s_max = 0.0;
  PinwheelConfig config;
  std::string endianness;
};

inline std::string native_endianness() {
  return std::endian::native == std::endian::little ? "little" : "big";
}

/// First line: JSON header; then nr*m*ns row-major float64 values (index
/// (i*m + k)*ns + j) in the byte order named by the header.
inline void write_field(const std::filesystem::path& path, const ComponentField& f, const PinwheelConfig& cfg) {
  const auto& g = *f.grid;
  json h;
  h["format"] = "pinwheel-field";
  h["version"] = 1;
  h["shape"] = {g.nr(), g.m(), g.ns()};
  h["r_max"] = g.r_max();
  h["s_max"] = g.s_max();
  h["n"] = cfg.n;
  h["ell"] = cfg.ell;
  h["dim"] = cfg.dim;
  h["p"] = cfg.p;
  h["beta"] = cfg.beta;
  h["grid_ell"] = g.ell();
  h["stencil"] = g.stencil() == AngularStencil::Spectral ? "spectral" : "central";
  h["endianness"] = native_endianness();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string text = h.dump();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed for " + path.string());
}

struct LoadedField {
  FieldHeader header;
  ComponentField field;
};

inline LoadedField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError("bad field header in " + path.string() + ": " + e.what());
  }
  if (h.value("format", "") != "pinwheel-field") throw IoError("not a field dump: " + path.string());
  LoadedField out;
  auto& hd = out.header;
  hd.nr = h["shape"][0].get<std::size_t>();
  hd.m = h["shape"][1].get<std::size_t>();
  hd.ns = h["shape"][2].get<std::size_t>();
  hd.r_max = h["r_max"].get<double>();
  hd.s_max = h["s_max"].get<double>();
  hd.config = PinwheelConfig{h["ell"].get<int>(), h["n"].get<int>(), h["dim"].get<int>(), h["p"].get<double>(),
                             h["beta"].get<double>()};
  hd.endianness = h["endianness"].get<std::string>();
  auto gcfg = hd.config;
  gcfg.ell = h.value("grid_ell", hd.config.ell);
  const auto stencil = h.value("stencil", "spectral") == "central" ? AngularStencil::Central : AngularStencil::Spectral;
  auto grid = build_grid(hd.nr, hd.m, hd.r_max, gcfg, hd.ns, hd.ns > 1 ? hd.s_max : 0.0, stencil);
  std::vector<double> values(grid->size());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double)))
    throw IoError("truncated field dump " + path.string());
  if (hd.endianness != native_endianness())
    for (double& v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(&v, &bits, sizeof bits);
    }
  out.field = ComponentField(grid, std::move(values));
  return out;
}

// ----------------------------------------------------------------------- CSV

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    out_ << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
    width_ = columns.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw IoError("CSV row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << '\n';
  }

  /// Row with a leading text column.
  void row(const std::string& label, const std::vector<double>& values) {
    if (values.size() + 1 != width_) throw IoError("CSV row width mismatch");
    out_ << label;
    for (double v : values) out_ << ',' << v;
    out_ << '\n';
  }

private:
  std::ofstream out_;
  std::size_t width_ = 0;
};

// ---------------------------------------------------------------------- JSON

/// JSON has no inf/nan; they are written as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const PinwheelConfig& c) {
  return json{{"ell", c.ell}, {"n", c.n}, {"dim", c.dim}, {"p", c.p}, {"beta", c.beta}};
}

inline json to_json(const EnergyBreakdown& b) {
  return json{{"total", b.total}, {"quadratic", b.quadratic}, {"self", b.self}, {"coupling", b.coupling}};
}

inline json to_json(const SolveReport& r) {
  json j;
  j["config"] = to_json(r.config);
  j["status"] = r.status;
  j["converged"] = r.converged;
  j["energy"] = r.energy;
  j["component_energy"] = r.component_energy;
  j["nehari_residual"] = r.nehari_residual;
  j["grad_norm"] = r.grad_norm;
  j["tol"] = r.tol;
  j["iterations"] = r.iterations;
  j["boundary_fraction"] = r.boundary_fraction;
  j["radiality"] = r.radiality;
  j["wall_time"] = r.wall_time;
  j["c_inf"] = number(r.c_inf);
  j["limit"] = number(r.config.ell * r.config.n * r.c_inf);
  j["margin"] = number(r.margin);
  j["below_threshold"] = r.below_threshold;
  j["breakdown"] = to_json(r.breakdown);
  return j;
}

inline json to_json(const PartitionResult& p) {
  return json{{"threshold", p.threshold},       {"coverage", p.coverage},
              {"union_measure", p.union_measure}, {"domain_measure", p.domain_measure},
              {"violations", p.violations},     {"energies", p.energies}};
}

inline json to_json(const InterfaceSummary& s) {
  return json{{"edges", s.records.size()},
              {"median_grad", s.median_grad},
              {"median_mismatch", s.median_mismatch},
              {"p90_mismatch", s.p90_mismatch},
              {"min_product", s.min_product}};
}

inline json to_json(const SignChangingResult& s) {
  return json{{"residual", s.residual},
              {"antisymmetry", s.antisymmetry},
              {"component_energy", s.component_energy},
              {"scalar_energy", s.scalar_energy},
              {"identity_error", s.identity_error}};
}

inline json to_json(const GroundState& g) {
  return json{{"dim", g.dim()},        {"p", g.p},           {"v_inf", g.potential.v_inf},
              {"energy", g.energy},    {"residual", g.residual}, {"iterations", g.iterations},
              {"nr", g.grid.size()},   {"r_max", g.grid.r_max()}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

// ----------------------------------------------------------------------- PGM

/// Binary PGM (P5) with maxval 65535; `pixels` are row-major, top row first.
inline void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint16_t>& pixels) {
  if (pixels.size() != width * height) throw IoError("PGM pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  for (std::uint16_t v : pixels) {
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

namespace detail {

/// Node of the polar grid nearest to plane point (x, y) in slice s = 0, or npos.
inline std::size_t nearest_node(const PolarGrid& g, double x, double y) {
  const double r = std::hypot(x, y);
  if (r >= g.r_max()) return static_cast<std::size_t>(-1);
  const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(r / g.dr()))), g.nr() - 1);
  const double period = 2.0 * std::numbers::pi / g.n();
  double th = std::fmod(std::atan2(y, x), period);
  if (th < 0.0) th += period;
  const auto k = static_cast<std::size_t>(std::llround(th / g.dtheta())) % g.m();
  return g.index(i, k, 0);
}

} // namespace detail

/// Cartesian heatmap of a component (j = 0 is u_1) over [-R_max, R_max]^2.
inline std::vector<std::uint16_t> render_component(const ComponentField& u1, int ell, int j, std::size_t size) {
  const auto& g = *u1.grid;
  const auto comp = j == 0 ? u1 : rotate_by_index(u1, component_shift(j, g.m(), ell));
  double vmax = 0.0;
  for (double v : comp.values) vmax = std::max(vmax, std::abs(v));
  std::vector<std::uint16_t> px(size * size, 0);
  for (std::size_t row = 0; row < size; ++row)
    for (std::size_t col = 0; col < size; ++col) {
      const double x = g.r_max() * (2.0 * (static_cast<double>(col) + 0.5) / size - 1.0);
      const double y = g.r_max() * (1.0 - 2.0 * (static_cast<double>(row) + 0.5) / size);
      const std::size_t node = detail::nearest_node(g, x, y);
      if (node == static_cast<std::size_t>(-1) || vmax == 0.0) continue;
      const double t = std::clamp(std::abs(comp.values[node]) / vmax, 0.0, 1.0);
      px[row * size + col] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    }
  return px;
}

/// Label map: component j+1 of the partition drawn at level (j+1)/ell, empty space 0.
inline std::vector<std::uint16_t> render_labels(const PartitionResult& part, std::size_t size) {
  const auto& g = *part.grid;
  const auto l = part.masks.size();
  std::vector<std::uint16_t> px(size * size, 0);
  for (std::size_t row = 0; row < size; ++row)
    for (std::size_t col = 0; col < size; ++col) {
      const double x = g.r_max() * (2.0 * (static_cast<double>(col) + 0.5) / size - 1.0);
      const double y = g.r_max() * (1.0 - 2.0 * (static_cast<double>(row) + 0.5) / size);
      const std::size_t node = detail::nearest_node(g, x, y);
      if (node == static_cast<std::size_t>(-1)) continue;
      for (std::size_t j = 0; j < l; ++j)
        if (part.masks[j][node]) {
          px[row * size + col] = static_cast<std::uint16_t>(65535 * (j + 1) / l);
          break;
        }
    }
  return px;
}

// ------------------------------------------------------------------ manifest

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

/// manifest.json: command, configuration echo and a hash of every file in `files`.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const json& config,
                           const std::vector<std::filesystem::path>& files) {
  json m;
  m["command"] = command;
  m["config"] = config;
  json list = json::array();
  for (const auto& f : files) {
    const auto full = dir / f;
    list.push_back({{"path", f.generic_string()},
                    {"bytes", std::filesystem::file_size(full)},
                    {"sha256", sha256_file(full)}});
  }
  m["files"] = list;
  write_json(dir / "manifest.json", m);
}

} // namespace pinwheel
