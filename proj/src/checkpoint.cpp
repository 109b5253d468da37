#include "stk/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace stk {

namespace {
constexpr char kMagic[8] = {'S', 'T', 'K', 'C', 'K', 'P', 'T', '1'};

void check_unique(const std::vector<Parameter>& params) {
  std::unordered_set<std::string> names;
  for (const auto& p : params)
    if (!names.insert(p.name).second)
      throw validation_error("duplicate parameter name: " + p.name);
}
}  // namespace

void save_checkpoint(const std::vector<Parameter>& params, const std::string& path) {
  check_unique(params);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw missing_artifact_error("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  const std::uint32_t count = static_cast<std::uint32_t>(params.size());
  os.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& p : params) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(p.name.size());
    os.write(reinterpret_cast<const char*>(&name_len), 4);
    os.write(p.name.data(), name_len);
    const auto& shape = p.tensor.shape();
    const std::uint32_t ndim = static_cast<std::uint32_t>(shape.size());
    os.write(reinterpret_cast<const char*>(&ndim), 4);
    for (int d : shape) {
      const std::int64_t d64 = d;
      os.write(reinterpret_cast<const char*>(&d64), 8);
    }
    const auto& v = p.tensor.values();
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!os) throw missing_artifact_error("short write to checkpoint: " + path);
}

void load_checkpoint(const std::vector<Parameter>& params, const std::string& path) {
  check_unique(params);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw missing_artifact_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw validation_error("not a checkpoint file (bad magic): " + path);
  std::uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), 4);

  std::unordered_map<std::string, const Parameter*> by_name;
  for (const auto& p : params) by_name.emplace(p.name, &p);
  std::unordered_set<std::string> loaded;

  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t ndim = 0;
    is.read(reinterpret_cast<char*>(&ndim), 4);
    std::vector<int> shape(ndim);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      std::int64_t d64 = 0;
      is.read(reinterpret_cast<char*>(&d64), 8);
      d = static_cast<int>(d64);
      numel *= d64;
    }
    std::vector<double> vals(static_cast<std::size_t>(numel));
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!is) throw validation_error("truncated checkpoint: " + path);
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw validation_error("checkpoint entry '" + name + "' has no matching parameter");
    if (it->second->tensor.shape() != shape)
      throw validation_error("checkpoint entry '" + name + "' shape mismatch");
    const_cast<Parameter*>(it->second)->tensor.values() = std::move(vals);
    loaded.insert(name);
  }
  for (const auto& p : params)
    if (!loaded.count(p.name))
      throw validation_error("parameter '" + p.name + "' missing from checkpoint " + path);
}

std::uint64_t parameter_digest(const std::vector<Parameter>& params) {
  // FNV-1a over the raw bytes of every value, in parameter order.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const auto& v = p.tensor.values();
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace stk
