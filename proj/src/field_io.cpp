#include "hmfg/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace hmfg {

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("truncated binary field");
  if constexpr (std::endian::native == std::endian::big)
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void write_header(std::ostream& os, const TorusGrid& g, uint32_t frames, double dt) {
  put_le<uint16_t>(os, static_cast<uint16_t>(g.dim()));
  put_le<uint16_t>(os, static_cast<uint16_t>(g.n()));
  put_le<uint32_t>(os, frames);
  put_le<double>(os, dt);
}

void write_row(std::ostream& os, const TorusGrid& g, Index k) {
  auto p = g.point(k);
  os << p[0] << ',';
  if (g.dim() == 2) os << p[1] << ',';
}

template <typename Stream>
Stream open_or_throw(const std::string& path, std::ios::openmode mode) {
  Stream s(path, mode);
  if (!s) throw std::runtime_error("cannot open " + path);
  s << std::setprecision(17);
  return s;
}

}  // namespace

void write_csv(std::ostream& os, const Field& f) {
  os << (f.grid.dim() == 1 ? "x,value\n" : "x,y,value\n");
  for (Index k = 0; k < f.size(); ++k) {
    write_row(os, f.grid, k);
    os << f[k] << '\n';
  }
}

void write_csv(std::ostream& os, const TimeField& f) {
  os << (f.grid.dim() == 1 ? "t,x,value\n" : "t,x,y,value\n");
  for (Index s = 0; s < f.frame_count(); ++s)
    for (Index k = 0; k < f.grid.size(); ++k) {
      os << f.t[size_t(s)] << ',';
      write_row(os, f.grid, k);
      os << f.frames(k, s) << '\n';
    }
}

void write_binary(std::ostream& os, const Field& f) {
  write_header(os, f.grid, 1, 0.0);
  for (Index k = 0; k < f.size(); ++k) put_le<double>(os, f[k]);
}

void write_binary(std::ostream& os, const TimeField& f) {
  const double dt = f.frame_count() > 1 ? f.t[1] - f.t[0] : 0.0;
  write_header(os, f.grid, static_cast<uint32_t>(f.frame_count()), dt);
  for (Index s = 0; s < f.frame_count(); ++s)
    for (Index k = 0; k < f.grid.size(); ++k) put_le<double>(os, f.frames(k, s));
}

TimeField read_binary(std::istream& is) {
  const int dim = get_le<uint16_t>(is);
  const int n = get_le<uint16_t>(is);
  const uint32_t frames = get_le<uint32_t>(is);
  const double dt = get_le<double>(is);
  TorusGrid g(dim, n);
  std::vector<double> t(frames);
  for (uint32_t s = 0; s < frames; ++s) t[s] = dt * s;
  TimeField f(g, t);
  for (uint32_t s = 0; s < frames; ++s)
    for (Index k = 0; k < g.size(); ++k) f.frames(k, s) = get_le<double>(is);
  return f;
}

void save_csv(const std::string& path, const Field& f) {
  auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::trunc);
  write_csv(os, f);
}

void save_csv(const std::string& path, const TimeField& f) {
  auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::trunc);
  write_csv(os, f);
}

void save_binary(const std::string& path, const Field& f) {
  auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::binary | std::ios::trunc);
  write_binary(os, f);
}

void save_binary(const std::string& path, const TimeField& f) {
  auto os = open_or_throw<std::ofstream>(path, std::ios::out | std::ios::binary | std::ios::trunc);
  write_binary(os, f);
}

TimeField load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_binary(is);
}

}  // namespace hmfg
