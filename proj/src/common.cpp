#include "survenet/common.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <thread>

namespace survenet {

std::string to_string(Method m) {
  switch (m) {
    case Method::Enet: return "Enet";
    case Method::AEnet: return "AEnet";
    case Method::AEnetCC: return "AEnetCC";
    case Method::WEnet: return "WEnet";
    case Method::WEnetCC: return "WEnetCC";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "enet") return Method::Enet;
  if (lower == "aenet") return Method::AEnet;
  if (lower == "aenetcc") return Method::AEnetCC;
  if (lower == "wenet") return Method::WEnet;
  if (lower == "wenetcc") return Method::WEnetCC;
  throw InputError("unknown method '" + name + "'");
}

Matrix select_rows(const Matrix& m, const IndexSet& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

Vector select_rows(const Vector& v, const IndexSet& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

Matrix select_cols(const Matrix& m, const IndexSet& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SURVENET_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return std::min<unsigned>(static_cast<unsigned>(v), hw);
  }
  return hw;
}

}  // namespace survenet
