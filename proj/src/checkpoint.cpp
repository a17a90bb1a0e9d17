#include "bda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "bda/errors.hpp"

namespace bda {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[8] = {'B', 'D', 'A', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw DataError("checkpoint is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const CheckpointData& ck) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.config_text.size()));
  out += ck.config_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& a : ck.arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.value.rank()));
    for (std::size_t d : a.value.shape()) put<std::uint64_t>(out, d);
    for (double v : a.value.data()) put<double>(out, v);
  }
  return out;
}

CheckpointData decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData ck;
  ck.config_text = r.bytes(r.get<std::uint32_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = r.get<double>();
    a.value = Tensor(std::move(shape), std::move(data));
    ck.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

CheckpointData snapshot(const Model& model, std::string config_text) {
  CheckpointData ck;
  ck.config_text = std::move(config_text);
  for (const Parameter* p : model.parameters()) {
    ck.arrays.push_back({p->name(), p->value()});
  }
  return ck;
}

void restore(Model& model, const CheckpointData& ck) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& a : ck.arrays) by_name[a.name] = &a.value;
  for (Parameter* p : model.parameters()) {
    auto it = by_name.find(p->name());
    if (it == by_name.end()) {
      throw DataError("checkpoint lacks parameter '" + p->name() + "'");
    }
    if (it->second->shape() != p->shape()) {
      throw DataError("checkpoint parameter '" + p->name() + "' has shape " +
                      shape_str(it->second->shape()) + ", model expects " +
                      shape_str(p->shape()));
    }
    p->mutable_value() = *it->second;
  }
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bda
