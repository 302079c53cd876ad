#include "kgdyn/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kg {

namespace {
constexpr char kMagic[8] = {'K', 'G', 'D', 'Y', 'N', 'F', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<char*>(b), 4);
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}
void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (u >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<char*>(b), 8);
}
double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}
}  // namespace

void write_snapshot(const std::filesystem::path& path, const Field& f) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_snapshot: cannot open " + tmp.string());
    os.write(kMagic, 8);
    put_u32(os, static_cast<std::uint32_t>(f.kind()));
    if (f.is_radial()) {
      put_u32(os, std::uint32_t(f.rgrid().n()));
      put_f64(os, f.rgrid().R());
    } else {
      put_u32(os, std::uint32_t(f.bgrid().n()));
      put_f64(os, f.bgrid().L());
    }
    put_f64(os, f.time);
    for (const auto& z : f.data()) {
      put_f64(os, z.real());
      put_f64(os, z.imag());
    }
    if (!os) throw std::runtime_error("write_snapshot: write failed");
  }
  std::filesystem::rename(tmp, path);
}

Field read_snapshot(const std::filesystem::path& path,
                    std::shared_ptr<const RadialGrid> rg,
                    std::shared_ptr<const BoxGrid> bg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_snapshot: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("read_snapshot: bad magic in " + path.string());
  auto kind = static_cast<GridKind>(get_u32(is));
  std::uint32_t n = get_u32(is);
  double RL = get_f64(is);
  double time = get_f64(is);
  Field f;
  if (kind == GridKind::radial) {
    if (!rg || rg->n() != int(n) || rg->R() != RL)
      rg = std::make_shared<RadialGrid>(RL, int(n));
    f = Field(rg);
  } else {
    if (!bg || bg->n() != int(n) || bg->L() != RL)
      bg = std::make_shared<BoxGrid>(RL, int(n));
    f = Field(bg);
  }
  for (auto& z : f.data()) {
    double re = get_f64(is), im = get_f64(is);
    z = cplx(re, im);
  }
  if (!is) throw std::runtime_error("read_snapshot: truncated file " + path.string());
  f.time = time;
  return f;
}

Field read_snapshot(const std::filesystem::path& path) {
  return read_snapshot(path, nullptr, nullptr);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_text_atomic: cannot open " + tmp.string());
    os.write(body.data(), std::streamsize(body.size()));
    if (!os) throw std::runtime_error("write_text_atomic: write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace kg
