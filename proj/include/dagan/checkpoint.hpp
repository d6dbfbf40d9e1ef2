#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dagan {

/// Binary layout, all integers little-endian:
///   "DAGN", u32 version, then three sections (params, optimizer, rng), each
///   u32 entry count followed by entries of
///   u16 name length, name, u8 dtype tag, u8 rank, u32 dims[rank], raw data.
/// Dtype tags: 0 = f32, 1 = f64, 2 = u64 (step counters and RNG words).
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class EntryType : std::uint8_t { F32 = 0, F64 = 1, U64 = 2 };

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, Framing };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointEntry {
  std::string name;
  EntryType type = EntryType::F32;
  std::vector<std::uint32_t> dims;
  std::string bytes;  // raw little-endian payload

  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  std::vector<CheckpointEntry> params;
  std::vector<CheckpointEntry> optimizer;
  std::vector<CheckpointEntry> rng;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Parses `bytes`, requiring every entry header (name, type, dims) and every
/// section size to match `layout`, checked before the payload is read. A
/// damaged length field therefore reports Framing with the tensor's name,
/// while a file that simply ends early reports Truncated.
Checkpoint parse_checkpoint(std::string_view bytes, const Checkpoint& layout);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path, const Checkpoint& layout);

}  // namespace dagan
