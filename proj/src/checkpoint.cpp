#include "dagan/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "dagan/netpbm.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace dagan {

namespace {

using K = CheckpointError::Kind;

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

std::size_t element_size(EntryType t) { return t == EntryType::F32 ? 4 : 8; }

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void put_section(std::string& out, const std::vector<CheckpointEntry>& entries) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 0xffff) throw std::invalid_argument("bad checkpoint entry name");
    if (e.bytes.size() != element_count(e.dims) * element_size(e.type)) {
      throw std::invalid_argument("checkpoint entry '" + e.name + "' payload does not match its dims");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out += e.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.type));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint32_t>(out, d);
    out += e.bytes;
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const std::string& what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& what) {
    if (remaining() < n) {
      throw CheckpointError(K::Truncated, "checkpoint truncated while reading " + what + " (need " +
                                              std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                                              " left)");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string dims_text(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

std::vector<CheckpointEntry> read_section(Reader& r, const char* section,
                                          const std::vector<CheckpointEntry>& layout) {
  const auto count = r.get<std::uint32_t>(std::string(section) + " section count");
  if (count != layout.size()) {
    throw CheckpointError(K::Framing, std::string(section) + " section has " + std::to_string(count) +
                                          " entries, expected " + std::to_string(layout.size()));
  }
  std::vector<CheckpointEntry> out;
  for (const auto& want : layout) {
    const std::string where = "'" + want.name + "'";
    const auto name_len = r.get<std::uint16_t>("name length of " + where);
    if (name_len != want.name.size()) {
      throw CheckpointError(K::Framing, "name length " + std::to_string(name_len) + " for tensor " + where +
                                            ", expected " + std::to_string(want.name.size()));
    }
    CheckpointEntry e;
    e.name = std::string(r.take(name_len, "name of " + where));
    if (e.name != want.name) {
      throw CheckpointError(K::Framing, "found tensor '" + e.name + "' where " + where + " was expected");
    }
    const auto tag = r.get<std::uint8_t>("dtype of " + where);
    if (tag > 2 || static_cast<EntryType>(tag) != want.type) {
      throw CheckpointError(K::Framing, "dtype tag " + std::to_string(tag) + " for tensor " + where +
                                            ", expected " + std::to_string(static_cast<int>(want.type)));
    }
    e.type = want.type;
    const auto rank = r.get<std::uint8_t>("rank of " + where);
    if (rank != want.dims.size()) {
      throw CheckpointError(K::Framing, "rank " + std::to_string(rank) + " for tensor " + where + ", expected " +
                                            std::to_string(want.dims.size()));
    }
    for (std::uint8_t i = 0; i < rank; ++i) e.dims.push_back(r.get<std::uint32_t>("dims of " + where));
    if (e.dims != want.dims) {
      throw CheckpointError(K::Framing, "tensor " + where + " has dims " + dims_text(e.dims) + ", expected " +
                                            dims_text(want.dims));
    }
    e.bytes = std::string(r.take(static_cast<std::size_t>(element_count(e.dims) * element_size(e.type)),
                                 "data of " + where));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = "DAGN";
  put<std::uint32_t>(out, kCheckpointVersion);
  put_section(out, ckpt.params);
  put_section(out, ckpt.optimizer);
  put_section(out, ckpt.rng);
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, const Checkpoint& layout) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "DAGN") {
    if (bytes.size() < 4 && std::string_view("DAGN").starts_with(bytes)) {
      throw CheckpointError(K::Truncated, "checkpoint truncated inside the magic");
    }
    throw CheckpointError(K::BadMagic, "not a checkpoint: bad magic");
  }
  Reader r(bytes.substr(4));
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(K::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.params = read_section(r, "params", layout.params);
  c.optimizer = read_section(r, "optimizer", layout.optimizer);
  c.rng = read_section(r, "rng", layout.rng);
  if (r.remaining() != 0) {
    throw CheckpointError(K::Framing, std::to_string(r.remaining()) + " trailing bytes after the rng section");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Checkpoint& layout) {
  return parse_checkpoint(read_file(path), layout);
}

}  // namespace dagan
