#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "fbdet/forest.hpp"

namespace fbdet {

// In-memory model of the write-staging recovery buffer. Writes land in a
// per-file overlay; a benign verdict at the window boundary flushes the
// overlay into the base content, a ransomware verdict discards it. Base
// content is only ever mutated by a benign commit.
class FileStore {
 public:
  void create_file(std::uint32_t file_id, std::vector<std::uint8_t> content);
  bool has_file(std::uint32_t file_id) const;
  std::uint64_t file_size(std::uint32_t file_id) const;

  // Records the write in the overlay; base is untouched. Throws on
  // out-of-bounds, leaving the overlay unchanged.
  void stage_write(std::uint32_t file_id, std::uint64_t offset,
                   std::span<const std::uint8_t> bytes);

  // Base content patched by the staged writes in arrival order.
  std::vector<std::uint8_t> read_view(std::uint32_t file_id, std::uint64_t offset,
                                      std::uint64_t len) const;

  void commit_window(std::uint32_t file_id, BinaryClass verdict);

  const std::vector<std::uint8_t>& base_content(std::uint32_t file_id) const;
  std::size_t staged_count(std::uint32_t file_id) const;

 private:
  struct StagedWrite {
    std::uint64_t offset;
    std::vector<std::uint8_t> bytes;
  };
  const std::vector<std::uint8_t>& base_or_throw(std::uint32_t file_id) const;

  std::map<std::uint32_t, std::vector<std::uint8_t>> base_;
  std::map<std::uint32_t, std::vector<StagedWrite>> staged_;
};

class RecoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fbdet
